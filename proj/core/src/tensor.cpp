#include "nested_metaseg/tensor.hpp"

#include <cmath>

#include "nested_metaseg/error.hpp"

namespace nested_metaseg {

std::string to_string(FrameShape shape) {
  return std::to_string(shape.rows) + "x" + std::to_string(shape.cols);
}

Tensor3::Tensor3(int r, int c, int ch, float fill)
    : rows(r),
      cols(c),
      channels(ch),
      data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c) * static_cast<std::size_t>(ch),
           fill) {}

Tensor3::Tensor3(int r, int c, int ch, std::vector<float> values)
    : rows(r), cols(c), channels(ch), data(std::move(values)) {
  if (r < 0 || c < 0 || ch < 0 ||
      data.size() != static_cast<std::size_t>(r) * static_cast<std::size_t>(c) *
                         static_cast<std::size_t>(ch)) {
    throw GeometryError("tensor payload of " + std::to_string(data.size()) +
                        " values does not match shape " + std::to_string(r) + "x" +
                        std::to_string(c) + "x" + std::to_string(ch));
  }
}

ProbabilityField::SimplexDeviation ProbabilityField::measure(const Tensor3& tensor) {
  SimplexDeviation dev;
  const std::size_t ch = static_cast<std::size_t>(tensor.channels);
  if (ch == 0) return dev;
  for (std::size_t p = 0; p < tensor.data.size(); p += ch) {
    double sum = 0.0;
    for (std::size_t k = 0; k < ch; ++k) {
      const float v = tensor.data[p + k];
      if (!(v >= 0.0f && v <= 1.0f)) dev.out_of_range = true;
      sum += v;
    }
    const double err = std::abs(sum - 1.0);
    if (!(err <= dev.max_sum_error)) dev.max_sum_error = std::isnan(err) ? INFINITY : err;
  }
  return dev;
}

ProbabilityField::ProbabilityField(Tensor3 tensor) : tensor_(std::move(tensor)) {
  if (tensor_.rows < 1 || tensor_.cols < 1) {
    throw GeometryError("probability field needs rows, cols >= 1, got " +
                        to_string(tensor_.shape()));
  }
  if (tensor_.channels < 2) {
    throw ValidationError("probability field needs at least 2 classes, got " +
                          std::to_string(tensor_.channels));
  }
  const SimplexDeviation dev = measure(tensor_);
  if (dev.out_of_range) throw ValidationError("probability entries must lie in [0, 1]");
  if (dev.max_sum_error > kSimplexTolerance) {
    throw ValidationError("pixel distribution sums deviate from 1 by " +
                          std::to_string(dev.max_sum_error));
  }
}

ProbabilityField ProbabilityField::adopt(Tensor3 tensor) {
  ProbabilityField field;
  field.tensor_ = std::move(tensor);
  return field;
}

ProbabilityField ProbabilityField::constant(FrameShape shape, std::span<const float> distribution) {
  Tensor3 t(shape.rows, shape.cols, static_cast<int>(distribution.size()));
  for (std::size_t p = 0; p < shape.pixels(); ++p) {
    for (std::size_t k = 0; k < distribution.size(); ++k) {
      t.data[p * distribution.size() + k] = distribution[k];
    }
  }
  return ProbabilityField(std::move(t));
}

void LabelMap::validate(int classes) const {
  for (std::int32_t v : data) {
    if (v == kIgnoreLabel) continue;
    if (v < 0 || v >= classes) {
      throw ValidationError("label value " + std::to_string(v) + " outside [0, " +
                            std::to_string(classes) + ") and not IGNORE (255)");
    }
  }
}

std::string_view heat_map_name(HeatMapKind kind) noexcept {
  switch (kind) {
    case HeatMapKind::kEntropy: return "E";
    case HeatMapKind::kMargin: return "M";
    case HeatMapKind::kVariationRatio: return "V";
    case HeatMapKind::kKullbackLeibler: return "K";
    case HeatMapKind::kMeanEntropy: return "mu_E";
    case HeatMapKind::kMeanMargin: return "mu_M";
    case HeatMapKind::kMeanVariationRatio: return "mu_V";
    case HeatMapKind::kVarEntropy: return "v_E";
    case HeatMapKind::kVarMargin: return "v_M";
    case HeatMapKind::kVarVariationRatio: return "v_V";
    case HeatMapKind::kOther: return "other";
  }
  return "other";
}

}  // namespace nested_metaseg
