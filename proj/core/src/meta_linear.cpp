#include <cmath>

#include "nested_metaseg/error.hpp"
#include "nested_metaseg/meta.hpp"

namespace nested_metaseg {
namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void require_rows(const Dataset& train) {
  if (train.rows() < 1) throw DegenerateError("empty training set");
  if (!train.x.allFinite() || !train.target.allFinite()) {
    throw ValidationError("training data contains non-finite values");
  }
}

void require_both_classes(const Eigen::VectorXd& labels) {
  const double positives = labels.sum();
  if (positives == 0.0 || positives == static_cast<double>(labels.size())) {
    throw DegenerateError("classification training set contains a single class");
  }
}

struct LogisticObjective {
  const Eigen::MatrixXd& x;
  const Eigen::VectorXd& y;

  // Mean negative log-likelihood at (w, b).
  double value(const Eigen::VectorXd& w, double b) const {
    const Eigen::VectorXd z = (x * w).array() + b;
    double s = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) s += softplus(z(i)) - y(i) * z(i);
    return s / static_cast<double>(z.size());
  }

  double value_and_gradient(const Eigen::VectorXd& w, double b, Eigen::VectorXd& gw, double& gb) const {
    const Eigen::VectorXd z = (x * w).array() + b;
    Eigen::VectorXd r(z.size());
    double s = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      s += softplus(z(i)) - y(i) * z(i);
      r(i) = sigmoid(z(i)) - y(i);
    }
    const double n = static_cast<double>(z.size());
    gw = x.transpose() * r / n;
    gb = r.sum() / n;
    return s / n;
  }
};

MetaModel single_layer_model(ModelKind kind, StandardScaler scaler, const Eigen::VectorXd& w, double b) {
  MetaModel m;
  m.kind = kind;
  m.scaler = std::move(scaler);
  DenseLayer layer;
  layer.weights = w.transpose();
  layer.bias = Eigen::VectorXd::Constant(1, b);
  m.layers.push_back(std::move(layer));
  return m;
}

}  // namespace

MetaModel fit_logistic(const Dataset& train, const MetaConfig& config) {
  require_rows(train);
  const Eigen::VectorXd y = train.labels();
  require_both_classes(y);
  StandardScaler scaler = StandardScaler::fit(train.x, train.features);
  const Eigen::MatrixXd x = scaler.transform(train.x);
  const LogisticObjective objective{x, y};

  Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
  double b = 0.0;
  Eigen::VectorXd gw;
  double gb = 0.0;
  double loss = objective.value_and_gradient(w, b, gw, gb);
  double step = 1.0;
  FitInfo info;
  const int max_iter = config.logistic.max_iterations;
  const double tol = config.logistic.gradient_tolerance;

  for (info.iterations = 0; info.iterations < max_iter; ++info.iterations) {
    const double gmax = std::max(gw.size() > 0 ? gw.cwiseAbs().maxCoeff() : 0.0, std::abs(gb));
    if (gmax <= tol) {
      info.converged = true;
      break;
    }
    const double gnorm2 = gw.squaredNorm() + gb * gb;
    // Armijo backtracking, starting from twice the last accepted step.
    step = std::min(step * 2.0, 1e6);
    Eigen::VectorXd w_new;
    double b_new = 0.0, loss_new = 0.0;
    while (true) {
      w_new = w - step * gw;
      b_new = b - step * gb;
      loss_new = objective.value(w_new, b_new);
      if (loss_new <= loss - 0.5 * step * gnorm2 || step < 1e-16) break;
      step *= 0.5;
    }
    w = std::move(w_new);
    b = b_new;
    loss = objective.value_and_gradient(w, b, gw, gb);
  }
  info.final_loss = loss;
  MetaModel model = single_layer_model(ModelKind::kLogistic, std::move(scaler), w, b);
  model.fit_info = info;
  return model;
}

MetaModel fit_linear(const Dataset& train, const MetaConfig& config) {
  require_rows(train);
  StandardScaler scaler = StandardScaler::fit(train.x, train.features);
  const Eigen::MatrixXd x = scaler.transform(train.x);
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n < d + 1) {
    throw DegenerateError("linear regression needs at least " + std::to_string(d + 1) +
                          " rows, got " + std::to_string(n));
  }
  Eigen::MatrixXd design(n, d + 1);
  design.col(0).setOnes();
  design.rightCols(d) = x;
  Eigen::MatrixXd gram = design.transpose() * design;
  for (Eigen::Index j = 1; j <= d; ++j) gram(j, j) += config.linear.ridge * static_cast<double>(n);
  const Eigen::VectorXd rhs = design.transpose() * train.target;
  const Eigen::VectorXd beta = gram.ldlt().solve(rhs);
  if (!beta.allFinite()) throw DegenerateError("normal equations are singular");

  MetaModel model = single_layer_model(ModelKind::kLinear, std::move(scaler), beta.tail(d), beta(0));
  const Eigen::VectorXd residual = design * beta - train.target;
  model.fit_info.iterations = 1;
  model.fit_info.converged = true;
  model.fit_info.final_loss = residual.squaredNorm() / static_cast<double>(n);
  return model;
}

MetaModel fit_model(ModelKind kind, const Dataset& train, const MetaConfig& config) {
  switch (kind) {
    case ModelKind::kLogistic: return fit_logistic(train, config);
    case ModelKind::kLinear: return fit_linear(train, config);
    case ModelKind::kMlpClassifier: return fit_mlp(train, Task::kClassify, config);
    case ModelKind::kMlpRegressor: return fit_mlp(train, Task::kRegress, config);
  }
  throw ValidationError("unknown model kind");
}

}  // namespace nested_metaseg
