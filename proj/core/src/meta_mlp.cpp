#include <cmath>

#include "nested_metaseg/error.hpp"
#include "nested_metaseg/meta.hpp"

namespace nested_metaseg {
namespace mlp {
namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Activations per layer (row = sample). acts[0] is the input; pre[l] the
// pre-activation of layer l.
struct Trace {
  std::vector<Eigen::MatrixXd> acts;
  std::vector<Eigen::MatrixXd> pre;
};

Trace run(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& x) {
  Trace t;
  t.acts.reserve(layers.size() + 1);
  t.pre.reserve(layers.size());
  t.acts.push_back(x);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = t.acts.back() * layers[l].weights.transpose();
    z.rowwise() += layers[l].bias.transpose();
    t.pre.push_back(z);
    if (l + 1 < layers.size()) t.acts.push_back(z.cwiseMax(0.0));
  }
  return t;
}

double data_loss(const Eigen::VectorXd& out, const Eigen::VectorXd& y, Task task) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (task == Task::kClassify) {
      s += softplus(out(i)) - y(i) * out(i);
    } else {
      const double r = out(i) - y(i);
      s += 0.5 * r * r;
    }
  }
  return s / static_cast<double>(out.size());
}

double penalty(const std::vector<DenseLayer>& layers, double l2) {
  double s = 0.0;
  for (const auto& layer : layers) s += layer.weights.squaredNorm();
  return 0.5 * l2 * s;
}

}  // namespace

std::vector<DenseLayer> init_layers(int inputs, std::span<const int> hidden, Rng& rng) {
  std::vector<DenseLayer> layers;
  int fan_in = inputs;
  auto add = [&](int outputs) {
    DenseLayer layer;
    const double limit = fan_in > 0 ? std::sqrt(6.0 / fan_in) : 0.0;
    layer.weights.resize(outputs, fan_in);
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) layer.weights(i, j) = rng.uniform(-limit, limit);
    }
    layer.bias = Eigen::VectorXd::Zero(outputs);
    layers.push_back(std::move(layer));
    fan_in = outputs;
  };
  for (int h : hidden) {
    if (h < 1) throw ValidationError("hidden layer sizes must be >= 1");
    add(h);
  }
  add(1);
  return layers;
}

Eigen::VectorXd forward(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& x) {
  return run(layers, x).pre.back().col(0);
}

double loss(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& x,
            const Eigen::VectorXd& y, Task task, double l2) {
  return data_loss(forward(layers, x), y, task) + penalty(layers, l2);
}

double loss_and_gradient(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& x,
                         const Eigen::VectorXd& y, Task task, double l2,
                         std::vector<DenseLayer>& gradient) {
  const Trace t = run(layers, x);
  const Eigen::VectorXd out = t.pre.back().col(0);
  const double n = static_cast<double>(x.rows());

  Eigen::MatrixXd delta(out.size(), 1);  // d loss / d pre-activation
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double p = task == Task::kClassify ? 1.0 / (1.0 + std::exp(-out(i))) : out(i);
    delta(i, 0) = (p - y(i)) / n;
  }

  gradient.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    gradient[l].weights = delta.transpose() * t.acts[l] + l2 * layers[l].weights;
    gradient[l].bias = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd back = delta * layers[l].weights;
      delta = back.cwiseProduct((t.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return data_loss(out, y, task) + penalty(layers, l2);
}

}  // namespace mlp

MetaModel fit_mlp(const Dataset& train, Task task, const MetaConfig& config) {
  if (train.rows() < 1) throw DegenerateError("empty training set");
  if (!train.x.allFinite() || !train.target.allFinite()) {
    throw ValidationError("training data contains non-finite values");
  }
  const MlpConfig& cfg = config.mlp;
  Eigen::VectorXd y = task == Task::kClassify ? train.labels() : train.target;
  if (task == Task::kClassify) {
    const double positives = y.sum();
    if (positives == 0.0 || positives == static_cast<double>(y.size())) {
      throw DegenerateError("classification training set contains a single class");
    }
  }

  MetaModel model;
  model.kind = task == Task::kClassify ? ModelKind::kMlpClassifier : ModelKind::kMlpRegressor;
  model.scaler = StandardScaler::fit(train.x, train.features);
  const Eigen::MatrixXd x = model.scaler.transform(train.x);

  Rng rng(cfg.seed, 0x6D6C70);
  model.layers = mlp::init_layers(static_cast<int>(x.cols()), cfg.hidden, rng);

  // Adam moments, same shapes as the parameters.
  std::vector<DenseLayer> m1(model.layers.size()), m2(model.layers.size()), grad;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    m1[l].weights = Eigen::MatrixXd::Zero(model.layers[l].weights.rows(), model.layers[l].weights.cols());
    m1[l].bias = Eigen::VectorXd::Zero(model.layers[l].bias.size());
    m2[l] = m1[l];
  }
  double b1t = 1.0, b2t = 1.0;
  double current = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    current = mlp::loss_and_gradient(model.layers, x, y, task, cfg.l2, grad);
    if (cfg.record_loss) model.fit_info.loss_history.push_back(current);
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    const double lr = cfg.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      m1[l].weights = cfg.beta1 * m1[l].weights + (1.0 - cfg.beta1) * grad[l].weights;
      m2[l].weights = cfg.beta2 * m2[l].weights + (1.0 - cfg.beta2) * grad[l].weights.cwiseAbs2();
      m1[l].bias = cfg.beta1 * m1[l].bias + (1.0 - cfg.beta1) * grad[l].bias;
      m2[l].bias = cfg.beta2 * m2[l].bias + (1.0 - cfg.beta2) * grad[l].bias.cwiseAbs2();
      model.layers[l].weights.array() -=
          lr * m1[l].weights.array() / (m2[l].weights.array().sqrt() + cfg.epsilon);
      model.layers[l].bias.array() -= lr * m1[l].bias.array() / (m2[l].bias.array().sqrt() + cfg.epsilon);
    }
  }
  model.fit_info.iterations = cfg.epochs;
  model.fit_info.converged = true;
  model.fit_info.final_loss = mlp::loss(model.layers, x, y, task, cfg.l2);
  return model;
}

}  // namespace nested_metaseg
