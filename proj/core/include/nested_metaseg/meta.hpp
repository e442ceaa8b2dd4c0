#pragma once

// Meta classification (IoU_adj = 0 vs > 0) and meta regression (IoU_adj)
// over segment-wise metrics.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "nested_metaseg/metrics.hpp"
#include "nested_metaseg/random.hpp"

namespace nested_metaseg {

enum class Task { kClassify, kRegress };

enum class ModelKind { kLogistic, kLinear, kMlpClassifier, kMlpRegressor };

Task task_of(ModelKind kind) noexcept;
std::string_view model_kind_name(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view name);

/// Labeled records restricted to a feature subset. `target` holds IoU_adj;
/// classification labels are target > 0.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd target;
  std::vector<std::string> features;

  Eigen::Index rows() const noexcept { return x.rows(); }
  Eigen::VectorXd labels() const;  // 1.0 where target > 0, else 0.0
};

/// Only records with IoU_adj. Throws ValidationError for unknown features.
Dataset make_dataset(const MetricsTable& table, std::span<const std::string> features);
Dataset select_rows(const Dataset& data, std::span<const std::size_t> rows);
Dataset select_columns(const Dataset& data, std::span<const std::string> features);

/// Per-feature standardization fitted on a training split. Features whose
/// training standard deviation is zero are dropped (and reported).
class StandardScaler {
 public:
  static StandardScaler fit(const Eigen::MatrixXd& x, std::span<const std::string> names);
  static StandardScaler from_parts(std::vector<std::string> inputs, std::vector<std::size_t> kept,
                                   Eigen::VectorXd mean, Eigen::VectorXd scale);

  /// `x` has one column per input feature; the result one per kept feature.
  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;

  const std::vector<std::string>& inputs() const noexcept { return inputs_; }
  const std::vector<std::size_t>& kept() const noexcept { return kept_; }
  std::vector<std::string> kept_names() const;
  std::vector<std::string> dropped_names() const;
  const Eigen::VectorXd& mean() const noexcept { return mean_; }    // per kept feature
  const Eigen::VectorXd& scale() const noexcept { return scale_; }  // per kept feature

 private:
  std::vector<std::string> inputs_;
  std::vector<std::size_t> kept_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd scale_;
};

/// Fully connected layer: out = weights * in + bias.
struct DenseLayer {
  Eigen::MatrixXd weights;  // outputs x inputs
  Eigen::VectorXd bias;
};

struct LogisticConfig {
  int max_iterations = 10000;
  double gradient_tolerance = 1e-8;  // on the max-norm of the gradient
};

struct LinearConfig {
  double ridge = 1e-10;  // diagonal jitter on the normal equations
};

struct MlpConfig {
  std::vector<int> hidden = {61, 61};
  double l2 = 0.005;  // penalty (l2 / 2) * sum of squared weights
  double learning_rate = 1e-3;
  int epochs = 2000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool record_loss = false;
};

struct MetaConfig {
  LogisticConfig logistic;
  LinearConfig linear;
  MlpConfig mlp;
};

struct FitInfo {
  int iterations = 0;
  bool converged = false;
  double final_loss = 0.0;
  std::vector<double> loss_history;  // per epoch, MLP with record_loss only
};

class MetaModel {
 public:
  ModelKind kind = ModelKind::kLinear;
  StandardScaler scaler;
  std::vector<DenseLayer> layers;  // a single layer for linear / logistic
  FitInfo fit_info;

  Task task() const noexcept { return task_of(kind); }
  const std::vector<std::string>& features() const noexcept { return scaler.inputs(); }

  /// Classifiers return P(IoU_adj > 0); regressors return IoU_adj clamped to
  /// [0, 1]. `x` has one column per entry of features().
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;

  /// Output before the final sigmoid / clamp.
  Eigen::VectorXd decision(const Eigen::MatrixXd& x) const;
};

/// Unregularized logistic regression by gradient descent with backtracking.
/// Throws DegenerateError if the training labels contain a single class.
MetaModel fit_logistic(const Dataset& train, const MetaConfig& config = {});

/// Least squares through the (jittered) normal equations.
MetaModel fit_linear(const Dataset& train, const MetaConfig& config = {});

/// ReLU network with hidden sizes config.mlp.hidden, full-batch Adam.
MetaModel fit_mlp(const Dataset& train, Task task, const MetaConfig& config = {});

MetaModel fit_model(ModelKind kind, const Dataset& train, const MetaConfig& config = {});

namespace mlp {

/// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
std::vector<DenseLayer> init_layers(int inputs, std::span<const int> hidden, Rng& rng);

/// Mean cross-entropy (classify, on logits) or mean half squared error
/// (regress) plus (l2 / 2) * sum of squared weights.
double loss(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& x,
            const Eigen::VectorXd& y, Task task, double l2);

/// Same loss; fills `gradient` (same shapes as `layers`) by backpropagation.
double loss_and_gradient(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& x,
                         const Eigen::VectorXd& y, Task task, double l2,
                         std::vector<DenseLayer>& gradient);

Eigen::VectorXd forward(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& x);

}  // namespace mlp

// ---------------------------------------------------------------- evaluation

struct ClassificationScores {
  double accuracy = 0.0;
  double auroc = 0.5;
};

struct RegressionScores {
  double sigma = 0.0;  // population standard deviation of residuals
  double r2 = 0.0;
};

/// Fraction of correct decisions with "positive" meaning score >= threshold.
double accuracy(std::span<const double> scores, std::span<const double> labels,
                double threshold = 0.5);

/// Trapezoidal area under the ROC curve over all distinct thresholds; tied
/// scores contribute half. Returns 0.5 when one class is absent.
double auroc(std::span<const double> scores, std::span<const double> labels);

/// 1 - SS_res / SS_tot; 0 when the target is constant.
double r_squared(std::span<const double> predictions, std::span<const double> targets);
double residual_sigma(std::span<const double> predictions, std::span<const double> targets);

ClassificationScores evaluate_classifier(const MetaModel& model, const Dataset& data);
RegressionScores evaluate_regressor(const MetaModel& model, const Dataset& data);

// ------------------------------------------------------------------ protocol

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// `runs` fresh random permutations split into equal halves (train takes the
/// extra record when n is odd). Throws DegenerateError for n < 2.
std::vector<Split> split_resample(std::size_t n, int runs, std::uint64_t seed);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over runs
};
MeanStd mean_std(std::span<const double> values);

/// Scores of one run; for classifiers (first, second) = (ACC, AUROC), for
/// regressors (sigma, R^2).
struct RunScores {
  std::size_t train_size = 0;
  std::size_t val_size = 0;
  double train_first = 0.0, train_second = 0.0;
  double val_first = 0.0, val_second = 0.0;
};

struct ProtocolEntry {
  ModelKind kind = ModelKind::kLinear;
  std::string feature_set;
  std::vector<std::string> features;
  std::vector<RunScores> runs;
  MeanStd train_first, train_second, val_first, val_second;
};

struct NamedFeatureSet {
  std::string name;
  std::vector<std::string> features;
};

struct EvalReport {
  int runs = 0;
  std::uint64_t seed = 0;
  std::size_t labeled_records = 0;
  MeanStd baseline_accuracy;  // always predict IoU_adj > 0, on val
  std::vector<ProtocolEntry> entries;
};

/// Every (model kind, feature set) pair is fitted on the train half and scored
/// on both halves of each resampled split. Fits run on up to `threads`
/// workers; results do not depend on the thread count.
EvalReport run_protocol(const MetricsTable& table, std::span<const ModelKind> kinds,
                        std::span<const NamedFeatureSet> feature_sets, int runs, std::uint64_t seed,
                        const MetaConfig& config = {}, int threads = 1);

struct GreedyStep {
  std::string feature;
  double score = 0.0;  // validation ACC or R^2 after adding `feature`
};

struct GreedyResult {
  Task task = Task::kRegress;
  std::uint64_t seed = 0;
  std::size_t train_size = 0;
  std::size_t val_size = 0;
  std::vector<GreedyStep> steps;
};

/// Forward selection on one fixed split: each step adds the candidate that
/// maximizes validation ACC (classification, logistic) or R^2 (regression,
/// linear). Ties go to the earlier catalog feature.
GreedyResult greedy_select(const MetricsTable& table, Task task, int max_features,
                           std::uint64_t seed, const MetaConfig& config = {},
                           std::span<const std::string> candidates = {}, int threads = 1);

// ----------------------------------------------------------------- persistence

void save_model(const MetaModel& model, const std::filesystem::path& path);
MetaModel load_model(const std::filesystem::path& path);

void save_report(const EvalReport& report, const std::filesystem::path& path);
std::string format_report(const EvalReport& report);

void save_greedy(const GreedyResult& result, const std::filesystem::path& json_path,
                 const std::filesystem::path& csv_path);

}  // namespace nested_metaseg
