#include "nested_metaseg/dispersion.hpp"

#include "nested_metaseg/error.hpp"

namespace nested_metaseg {

HeatMapKind heat_map_kind(Measure m) noexcept {
  switch (m) {
    case Measure::kEntropy: return HeatMapKind::kEntropy;
    case Measure::kMargin: return HeatMapKind::kMargin;
    case Measure::kVariationRatio: return HeatMapKind::kVariationRatio;
  }
  return HeatMapKind::kOther;
}

HeatMapKind mean_kind(Measure m) noexcept {
  switch (m) {
    case Measure::kEntropy: return HeatMapKind::kMeanEntropy;
    case Measure::kMargin: return HeatMapKind::kMeanMargin;
    case Measure::kVariationRatio: return HeatMapKind::kMeanVariationRatio;
  }
  return HeatMapKind::kOther;
}

HeatMapKind variance_kind(Measure m) noexcept {
  switch (m) {
    case Measure::kEntropy: return HeatMapKind::kVarEntropy;
    case Measure::kMargin: return HeatMapKind::kVarMargin;
    case Measure::kVariationRatio: return HeatMapKind::kVarVariationRatio;
  }
  return HeatMapKind::kOther;
}

HeatMap measure_map(const ProbabilityField& field, Measure m) {
  HeatMap out{heat_map_kind(m), ScalarMap(field.rows(), field.cols())};
  for (int r = 0; r < field.rows(); ++r) {
    for (int c = 0; c < field.cols(); ++c) {
      out.values.at(r, c) = pixel::measure(m, field.pixel(r, c));
    }
  }
  return out;
}

HeatMap entropy_map(const ProbabilityField& field) { return measure_map(field, Measure::kEntropy); }
HeatMap margin_map(const ProbabilityField& field) { return measure_map(field, Measure::kMargin); }
HeatMap variation_ratio_map(const ProbabilityField& field) {
  return measure_map(field, Measure::kVariationRatio);
}

CropStatistics crop_mean_var(const CropPyramid& pyramid, Measure m) {
  if (pyramid.merged.empty()) throw GeometryError("empty crop pyramid");
  const FrameShape shape = pyramid.shape();
  std::vector<double> sum(shape.pixels(), 0.0), sum_sq(shape.pixels(), 0.0);
  for (const ProbabilityField& a : pyramid.merged) {
    std::size_t p = 0;
    for (int r = 0; r < shape.rows; ++r) {
      for (int c = 0; c < shape.cols; ++c, ++p) {
        const double u = pixel::measure(m, a.pixel(r, c));
        sum[p] += u;
        sum_sq[p] += u * u;
      }
    }
  }
  const double n = static_cast<double>(pyramid.merged.size());
  CropStatistics out{{mean_kind(m), ScalarMap(shape.rows, shape.cols)},
                     {variance_kind(m), ScalarMap(shape.rows, shape.cols)}};
  for (std::size_t p = 0; p < sum.size(); ++p) {
    const double mu = sum[p] / n;
    out.mean.values.data[p] = mu;
    out.variance.values.data[p] = std::max(0.0, sum_sq[p] / n - mu * mu);
  }
  return out;
}

HeatMap kl_map(const ProbabilityField& mean, const ProbabilityField& base) {
  if (mean.shape() != base.shape() || mean.classes() != base.classes()) {
    throw GeometryError("KL map needs fields of identical shape");
  }
  HeatMap out{HeatMapKind::kKullbackLeibler, ScalarMap(mean.rows(), mean.cols())};
  for (int r = 0; r < mean.rows(); ++r) {
    for (int c = 0; c < mean.cols(); ++c) {
      out.values.at(r, c) = pixel::symmetric_kl(mean.pixel(r, c), base.pixel(r, c));
    }
  }
  return out;
}

HeatMap kl_map(const CropPyramid& pyramid) {
  if (pyramid.merged.empty()) throw GeometryError("empty crop pyramid");
  return kl_map(pyramid.mean, pyramid.merged.front());
}

DispersionAccumulator::DispersionAccumulator(FrameShape shape) : shape_(shape) {
  for (auto& v : sum_) v.assign(shape.pixels(), 0.0);
  for (auto& v : sum_sq_) v.assign(shape.pixels(), 0.0);
}

void DispersionAccumulator::add(const ProbabilityField& merged) {
  if (merged.shape() != shape_) throw GeometryError("dispersion accumulator shape mismatch");
  std::size_t p = 0;
  for (int r = 0; r < shape_.rows; ++r) {
    for (int c = 0; c < shape_.cols; ++c, ++p) {
      const auto px = merged.pixel(r, c);
      const double e = pixel::entropy(px);
      const double m = pixel::margin(px);
      const double v = pixel::variation_ratio(px);
      sum_[0][p] += e;
      sum_[1][p] += m;
      sum_[2][p] += v;
      sum_sq_[0][p] += e * e;
      sum_sq_[1][p] += m * m;
      sum_sq_[2][p] += v * v;
    }
  }
  ++count_;
}

DispersionMaps DispersionAccumulator::finish(const ProbabilityField& mean,
                                             const ProbabilityField& base) const {
  if (count_ == 0) throw GeometryError("dispersion accumulator received no fields");
  const double n = static_cast<double>(count_);
  constexpr Measure kMeasures[] = {Measure::kEntropy, Measure::kMargin, Measure::kVariationRatio};
  HeatMap mu[3], var[3];
  for (int k = 0; k < 3; ++k) {
    mu[k] = {mean_kind(kMeasures[k]), ScalarMap(shape_.rows, shape_.cols)};
    var[k] = {variance_kind(kMeasures[k]), ScalarMap(shape_.rows, shape_.cols)};
    for (std::size_t p = 0; p < shape_.pixels(); ++p) {
      const double m = sum_[k][p] / n;
      mu[k].values.data[p] = m;
      var[k].values.data[p] = std::max(0.0, sum_sq_[k][p] / n - m * m);
    }
  }
  return DispersionMaps{std::move(mu[0]), std::move(mu[1]),  std::move(mu[2]),
                        std::move(var[0]), std::move(var[1]), std::move(var[2]),
                        kl_map(mean, base)};
}

DispersionMaps compute_dispersion_maps(const CropPyramid& pyramid) {
  if (pyramid.merged.empty()) throw GeometryError("empty crop pyramid");
  DispersionAccumulator acc(pyramid.shape());
  for (const auto& a : pyramid.merged) acc.add(a);
  return acc.finish(pyramid.mean, pyramid.merged.front());
}

}  // namespace nested_metaseg
