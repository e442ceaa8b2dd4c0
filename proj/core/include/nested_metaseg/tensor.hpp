#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nested_metaseg {

/// Rows x cols of a frame, crop or map.
struct FrameShape {
  int rows = 0;
  int cols = 0;

  std::size_t pixels() const noexcept {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
  bool valid() const noexcept { return rows >= 1 && cols >= 1; }

  friend auto operator<=>(const FrameShape&, const FrameShape&) = default;
};

std::string to_string(FrameShape shape);

/// Dense row-major rows x cols x channels float tensor with no invariants
/// beyond its shape. Used for logits, raw crops and intermediate resampling.
struct Tensor3 {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  std::vector<float> data;

  Tensor3() = default;
  Tensor3(int rows, int cols, int channels, float fill = 0.0f);
  Tensor3(int rows, int cols, int channels, std::vector<float> values);

  FrameShape shape() const noexcept { return {rows, cols}; }
  std::size_t offset(int r, int c) const noexcept {
    return (static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
            static_cast<std::size_t>(c)) *
           static_cast<std::size_t>(channels);
  }
  std::span<float> pixel(int r, int c) noexcept {
    return {data.data() + offset(r, c), static_cast<std::size_t>(channels)};
  }
  std::span<const float> pixel(int r, int c) const noexcept {
    return {data.data() + offset(r, c), static_cast<std::size_t>(channels)};
  }
};

/// Dense row-major 2-D grid.
template <class T>
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int r, int c, T fill = T{})
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

  FrameShape shape() const noexcept { return {rows, cols}; }
  std::size_t index(int r, int c) const noexcept {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
           static_cast<std::size_t>(c);
  }
  T& at(int r, int c) noexcept { return data[index(r, c)]; }
  const T& at(int r, int c) const noexcept { return data[index(r, c)]; }
};

using ScalarMap = Grid<double>;

/// Per-pixel categorical distribution over `classes` labels.
///
/// Invariants (checked by the validating constructor): rows, cols >= 1,
/// classes >= 2, every entry in [0, 1] and every pixel vector sums to one
/// within kSimplexTolerance.
class ProbabilityField {
 public:
  static constexpr double kSimplexTolerance = 1e-5;

  ProbabilityField() = default;

  /// Validates; throws ValidationError / GeometryError.
  explicit ProbabilityField(Tensor3 tensor);

  /// Wraps a tensor that the caller guarantees to satisfy the invariants
  /// (outputs of resampling, blending and averaging in this library).
  static ProbabilityField adopt(Tensor3 tensor);

  /// Every pixel equal to `distribution`.
  static ProbabilityField constant(FrameShape shape, std::span<const float> distribution);

  int rows() const noexcept { return tensor_.rows; }
  int cols() const noexcept { return tensor_.cols; }
  int classes() const noexcept { return tensor_.channels; }
  FrameShape shape() const noexcept { return tensor_.shape(); }

  std::span<const float> pixel(int r, int c) const noexcept { return tensor_.pixel(r, c); }
  std::span<const float> values() const noexcept { return tensor_.data; }
  const Tensor3& tensor() const noexcept { return tensor_; }

  /// Largest |sum - 1| over all pixels and whether any entry left [0, 1].
  struct SimplexDeviation {
    double max_sum_error = 0.0;
    bool out_of_range = false;
  };
  static SimplexDeviation measure(const Tensor3& tensor);

 private:
  Tensor3 tensor_;
};

/// Reserved label for pixels without ground truth.
inline constexpr std::int32_t kIgnoreLabel = 255;

struct LabelMap {
  int rows = 0;
  int cols = 0;
  std::vector<std::int32_t> data;

  LabelMap() = default;
  LabelMap(int r, int c, std::int32_t fill = 0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

  FrameShape shape() const noexcept { return {rows, cols}; }
  std::size_t index(int r, int c) const noexcept {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
           static_cast<std::size_t>(c);
  }
  std::int32_t& at(int r, int c) noexcept { return data[index(r, c)]; }
  std::int32_t at(int r, int c) const noexcept { return data[index(r, c)]; }

  /// Throws ValidationError unless every value is in [0, classes) or IGNORE.
  void validate(int classes) const;
};

/// Which quantity a heat map holds.
enum class HeatMapKind {
  kEntropy,
  kMargin,
  kVariationRatio,
  kKullbackLeibler,
  kMeanEntropy,
  kMeanMargin,
  kMeanVariationRatio,
  kVarEntropy,
  kVarMargin,
  kVarVariationRatio,
  kOther,
};

std::string_view heat_map_name(HeatMapKind kind) noexcept;

struct HeatMap {
  HeatMapKind kind = HeatMapKind::kOther;
  ScalarMap values;

  int rows() const noexcept { return values.rows; }
  int cols() const noexcept { return values.cols; }
  FrameShape shape() const noexcept { return values.shape(); }
};

}  // namespace nested_metaseg
