#include <algorithm>
#include <cmath>
#include <numeric>

#include "nested_metaseg/error.hpp"
#include "nested_metaseg/meta.hpp"

namespace nested_metaseg {
namespace {

void require_same_size(std::size_t a, std::size_t b) {
  if (a != b) throw ValidationError("scores and labels differ in length");
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

double accuracy(std::span<const double> scores, std::span<const double> labels, double threshold) {
  require_same_size(scores.size(), labels.size());
  if (scores.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] > 0.5;
    hits += predicted == actual ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

double auroc(std::span<const double> scores, std::span<const double> labels) {
  require_same_size(scores.size(), labels.size());
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double positives = 0.0, negatives = 0.0;
  for (double l : labels) (l > 0.5 ? positives : negatives) += 1.0;
  if (positives == 0.0 || negatives == 0.0) return 0.5;

  // Walk thresholds from high to low; each block of tied scores adds one
  // trapezoid to the (false positive, true positive) count curve.
  double tp = 0.0, fp = 0.0, area = 0.0;
  for (std::size_t a = 0; a < order.size();) {
    std::size_t b = a;
    double dtp = 0.0, dfp = 0.0;
    while (b < order.size() && scores[order[b]] == scores[order[a]]) {
      (labels[order[b]] > 0.5 ? dtp : dfp) += 1.0;
      ++b;
    }
    area += dfp * (tp + 0.5 * dtp);
    tp += dtp;
    fp += dfp;
    a = b;
  }
  return area / (positives * negatives);
}

double r_squared(std::span<const double> predictions, std::span<const double> targets) {
  require_same_size(predictions.size(), targets.size());
  if (targets.empty()) return 0.0;
  // Constant target: R^2 is 0 by convention. Tested exactly, since the
  // rounded mean can leave a spurious SS_tot of order 1e-32.
  const auto [lo, hi] = std::minmax_element(targets.begin(), targets.end());
  if (*lo == *hi) return 0.0;
  const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ss_res += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
    ss_tot += (targets[i] - mean) * (targets[i] - mean);
  }
  if (ss_tot <= 0.0) return 0.0;
  return 1.0 - ss_res / ss_tot;
}

double residual_sigma(std::span<const double> predictions, std::span<const double> targets) {
  require_same_size(predictions.size(), targets.size());
  if (targets.empty()) return 0.0;
  const double n = static_cast<double>(targets.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) mean += predictions[i] - targets[i];
  mean /= n;
  double var = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = predictions[i] - targets[i] - mean;
    var += d * d;
  }
  return std::sqrt(var / n);
}

ClassificationScores evaluate_classifier(const MetaModel& model, const Dataset& data) {
  const Dataset aligned = select_columns(data, model.features());
  const Eigen::VectorXd scores = model.predict(aligned.x);
  const Eigen::VectorXd labels = data.labels();
  return {accuracy(as_span(scores), as_span(labels)), auroc(as_span(scores), as_span(labels))};
}

RegressionScores evaluate_regressor(const MetaModel& model, const Dataset& data) {
  const Dataset aligned = select_columns(data, model.features());
  const Eigen::VectorXd pred = model.predict(aligned.x);
  return {residual_sigma(as_span(pred), as_span(data.target)), r_squared(as_span(pred), as_span(data.target))};
}

std::vector<Split> split_resample(std::size_t n, int runs, std::uint64_t seed) {
  if (n < 2) throw DegenerateError("resampling needs at least 2 labeled records, got " + std::to_string(n));
  if (runs < 1) throw ValidationError("runs must be >= 1");
  std::vector<Split> out;
  const std::size_t n_train = (n + 1) / 2;
  for (int r = 0; r < runs; ++r) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed, 0x5EED0000ULL + static_cast<std::uint64_t>(r));
    rng.shuffle(std::span<std::size_t>(perm));
    Split s;
    s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    out.push_back(std::move(s));
  }
  return out;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n)};
}

}  // namespace nested_metaseg
