#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "nested_metaseg/crop_pyramid.hpp"
#include "nested_metaseg/tensor.hpp"

namespace nested_metaseg {

/// Pixel-wise dispersion measures of a categorical distribution.
enum class Measure { kEntropy, kMargin, kVariationRatio };

/// Clamp applied to probabilities before taking logarithms in the KL map.
inline constexpr double kKlEpsilon = 1e-10;

namespace pixel {

/// Normalized Shannon entropy, -(1/log C) sum p log p with 0 log 0 = 0.
template <class T>
double entropy(std::span<const T> p) {
  double h = 0.0;
  for (T v : p) {
    const double x = static_cast<double>(v);
    if (x > 0.0) h -= x * std::log(x);
  }
  return std::clamp(h / std::log(static_cast<double>(p.size())), 0.0, 1.0);
}

/// Largest and second largest entries.
template <class T>
std::pair<double, double> top_two(std::span<const T> p) {
  double first = -1.0, second = -1.0;
  for (T v : p) {
    const double x = static_cast<double>(v);
    if (x > first) {
      second = first;
      first = x;
    } else if (x > second) {
      second = x;
    }
  }
  return {first, second};
}

/// 1 - p_(1) + p_(2).
template <class T>
double margin(std::span<const T> p) {
  const auto [first, second] = top_two(p);
  return std::clamp(1.0 - first + second, 0.0, 1.0);
}

/// 1 - p_(1), bounded by 1 - 1/C.
template <class T>
double variation_ratio(std::span<const T> p) {
  double first = 0.0;
  for (T v : p) first = std::max(first, static_cast<double>(v));
  const double c = static_cast<double>(p.size());
  return std::clamp(1.0 - first, 0.0, 1.0 - 1.0 / c);
}

template <class T>
double measure(Measure m, std::span<const T> p) {
  switch (m) {
    case Measure::kEntropy: return entropy(p);
    case Measure::kMargin: return margin(p);
    case Measure::kVariationRatio: return variation_ratio(p);
  }
  return 0.0;
}

/// Symmetrized KL divergence with a 1/(2C) prefactor:
/// (1/2C) sum_y [a_y log(a_y/b_y) + b_y log(b_y/a_y)], logs of probabilities
/// clamped at kKlEpsilon.
template <class T>
double symmetric_kl(std::span<const T> a, std::span<const T> b) {
  double s = 0.0;
  for (std::size_t y = 0; y < a.size(); ++y) {
    const double x = static_cast<double>(a[y]);
    const double z = static_cast<double>(b[y]);
    const double log_ratio = std::log(std::max(x, kKlEpsilon)) - std::log(std::max(z, kKlEpsilon));
    s += (x - z) * log_ratio;
  }
  return std::max(0.0, s / (2.0 * static_cast<double>(a.size())));
}

}  // namespace pixel

HeatMapKind heat_map_kind(Measure m) noexcept;
HeatMapKind mean_kind(Measure m) noexcept;
HeatMapKind variance_kind(Measure m) noexcept;

HeatMap entropy_map(const ProbabilityField& field);
HeatMap margin_map(const ProbabilityField& field);
HeatMap variation_ratio_map(const ProbabilityField& field);
HeatMap measure_map(const ProbabilityField& field, Measure m);

struct CropStatistics {
  HeatMap mean;      // mu U
  HeatMap variance;  // v U = mu(U^2) - mu(U)^2, clamped at 0
};

/// Mean and population variance of measure `m` over A_0..A_n.
CropStatistics crop_mean_var(const CropPyramid& pyramid, Measure m);

/// Symmetrized KL between the crop mean and the uncropped field A_0.
HeatMap kl_map(const ProbabilityField& mean, const ProbabilityField& base);
HeatMap kl_map(const CropPyramid& pyramid);

/// The seven heat maps aggregated over segments.
struct DispersionMaps {
  HeatMap mu_entropy, mu_margin, mu_variation;
  HeatMap v_entropy, v_margin, v_variation;
  HeatMap kl;

  /// In catalog order: mu_E, mu_M, mu_V, v_E, v_M, v_V, K.
  std::array<const HeatMap*, 7> ordered() const noexcept {
    return {&mu_entropy, &mu_margin, &mu_variation, &v_entropy, &v_margin, &v_variation, &kl};
  }
};

/// Accumulates the mean/variance maps of all three measures while the
/// pyramid is being merged, so merged fields need not be kept.
class DispersionAccumulator {
 public:
  explicit DispersionAccumulator(FrameShape shape);

  void add(const ProbabilityField& merged);
  int count() const noexcept { return count_; }

  /// `base` is A_0, `mean` the crop mean.
  DispersionMaps finish(const ProbabilityField& mean, const ProbabilityField& base) const;

 private:
  FrameShape shape_;
  int count_ = 0;
  std::array<std::vector<double>, 3> sum_;
  std::array<std::vector<double>, 3> sum_sq_;
};

DispersionMaps compute_dispersion_maps(const CropPyramid& pyramid);

}  // namespace nested_metaseg
