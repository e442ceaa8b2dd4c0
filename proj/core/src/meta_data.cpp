#include <algorithm>
#include <cmath>

#include "nested_metaseg/error.hpp"
#include "nested_metaseg/meta.hpp"

namespace nested_metaseg {

Task task_of(ModelKind kind) noexcept {
  return (kind == ModelKind::kLogistic || kind == ModelKind::kMlpClassifier) ? Task::kClassify
                                                                             : Task::kRegress;
}

std::string_view model_kind_name(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::kLogistic: return "logistic";
    case ModelKind::kLinear: return "linear";
    case ModelKind::kMlpClassifier: return "mlp-classifier";
    case ModelKind::kMlpRegressor: return "mlp-regressor";
  }
  return "linear";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : {ModelKind::kLogistic, ModelKind::kLinear, ModelKind::kMlpClassifier,
                      ModelKind::kMlpRegressor}) {
    if (model_kind_name(k) == name) return k;
  }
  throw ValidationError("unknown model kind '" + std::string(name) +
                        "' (expected logistic, linear, mlp-classifier or mlp-regressor)");
}

Eigen::VectorXd Dataset::labels() const {
  return (target.array() > 0.0).cast<double>();
}

Dataset make_dataset(const MetricsTable& table, std::span<const std::string> features) {
  std::vector<int> columns;
  for (const auto& f : features) {
    const int c = table.column_index(f);
    if (c < 0) throw ValidationError("metrics table has no feature '" + f + "'");
    columns.push_back(c);
  }
  const std::size_t n = table.labeled_count();
  Dataset d;
  d.features.assign(features.begin(), features.end());
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns.size()));
  d.target.resize(static_cast<Eigen::Index>(n));
  Eigen::Index row = 0;
  for (const auto& r : table.records) {
    if (!r.has_target()) continue;
    for (std::size_t j = 0; j < columns.size(); ++j) {
      d.x(row, static_cast<Eigen::Index>(j)) = r.features[static_cast<std::size_t>(columns[j])];
    }
    d.target(row) = *r.iou_adj;
    ++row;
  }
  return d;
}

Dataset select_rows(const Dataset& data, std::span<const std::size_t> rows) {
  Dataset d;
  d.features = data.features;
  d.x.resize(static_cast<Eigen::Index>(rows.size()), data.x.cols());
  d.target.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = static_cast<Eigen::Index>(rows[i]);
    d.x.row(static_cast<Eigen::Index>(i)) = data.x.row(src);
    d.target(static_cast<Eigen::Index>(i)) = data.target(src);
  }
  return d;
}

Dataset select_columns(const Dataset& data, std::span<const std::string> features) {
  Dataset d;
  d.features.assign(features.begin(), features.end());
  d.target = data.target;
  d.x.resize(data.x.rows(), static_cast<Eigen::Index>(features.size()));
  for (std::size_t j = 0; j < features.size(); ++j) {
    const auto it = std::find(data.features.begin(), data.features.end(), features[j]);
    if (it == data.features.end()) throw ValidationError("dataset has no feature '" + features[j] + "'");
    d.x.col(static_cast<Eigen::Index>(j)) = data.x.col(it - data.features.begin());
  }
  return d;
}

StandardScaler StandardScaler::fit(const Eigen::MatrixXd& x, std::span<const std::string> names) {
  if (static_cast<std::size_t>(x.cols()) != names.size()) {
    throw ValidationError("scaler: column count does not match feature names");
  }
  if (x.rows() < 1) throw DegenerateError("scaler: no training rows");
  StandardScaler s;
  s.inputs_.assign(names.begin(), names.end());
  std::vector<double> mean, scale;
  const double n = static_cast<double>(x.rows());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double m = x.col(j).sum() / n;
    const double var = (x.col(j).array() - m).square().sum() / n;
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(m)))) continue;
    s.kept_.push_back(static_cast<std::size_t>(j));
    mean.push_back(m);
    scale.push_back(sd);
  }
  s.mean_ = Eigen::Map<Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  s.scale_ = Eigen::Map<Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  return s;
}

StandardScaler StandardScaler::from_parts(std::vector<std::string> inputs,
                                          std::vector<std::size_t> kept, Eigen::VectorXd mean,
                                          Eigen::VectorXd scale) {
  if (static_cast<std::size_t>(mean.size()) != kept.size() ||
      static_cast<std::size_t>(scale.size()) != kept.size()) {
    throw ValidationError("scaler: inconsistent parameter sizes");
  }
  for (std::size_t k : kept) {
    if (k >= inputs.size()) throw ValidationError("scaler: kept index out of range");
  }
  StandardScaler s;
  s.inputs_ = std::move(inputs);
  s.kept_ = std::move(kept);
  s.mean_ = std::move(mean);
  s.scale_ = std::move(scale);
  return s;
}

Eigen::MatrixXd StandardScaler::transform(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != inputs_.size()) {
    throw ValidationError("scaler: expected " + std::to_string(inputs_.size()) + " columns, got " +
                          std::to_string(x.cols()));
  }
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(kept_.size()));
  for (std::size_t j = 0; j < kept_.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    out.col(jj) = (x.col(static_cast<Eigen::Index>(kept_[j])).array() - mean_(jj)) / scale_(jj);
  }
  return out;
}

std::vector<std::string> StandardScaler::kept_names() const {
  std::vector<std::string> out;
  for (std::size_t k : kept_) out.push_back(inputs_[k]);
  return out;
}

std::vector<std::string> StandardScaler::dropped_names() const {
  std::vector<std::string> out;
  std::size_t next = 0;
  for (std::size_t j = 0; j < inputs_.size(); ++j) {
    if (next < kept_.size() && kept_[next] == j) {
      ++next;
    } else {
      out.push_back(inputs_[j]);
    }
  }
  return out;
}

Eigen::VectorXd MetaModel::decision(const Eigen::MatrixXd& x) const {
  return mlp::forward(layers, scaler.transform(x));
}

Eigen::VectorXd MetaModel::predict(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd z = decision(x);
  if (task() == Task::kClassify) {
    return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  }
  return z.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace nested_metaseg
