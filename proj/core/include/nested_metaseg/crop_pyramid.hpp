#pragma once

#include <functional>
#include <span>
#include <vector>

#include "nested_metaseg/tensor.hpp"

namespace nested_metaseg {

/// Centered window of nested crop `index`: `index * crop_step` rows are removed
/// at the top and bottom, `2 * index * crop_step` columns at the left and right.
struct CropGeometry {
  int index = 0;
  int crop_step = 1;
  int top = 0;
  int left = 0;
  FrameShape shape;

  int bottom() const noexcept { return top + shape.rows; }  // exclusive
  int right() const noexcept { return left + shape.cols; }  // exclusive
};

/// Throws GeometryError if the crop would be empty.
FrameShape crop_shape(int index, FrameShape base, int crop_step);
CropGeometry crop_geometry(int index, FrameShape base, int crop_step);

/// Centered sub-window of crop `index`.
Tensor3 restrict_crop(const Tensor3& tensor, int index, int crop_step);
ProbabilityField restrict_crop(const ProbabilityField& field, int index, int crop_step);

/// Per-channel bilinear resampling with half-pixel centers, clamped at the
/// edges. Resizing to the source shape returns an exact copy.
Tensor3 bilinear_resize(const Tensor3& tensor, FrameShape target);

/// Resamples and renormalizes every pixel onto the simplex.
ProbabilityField bilinear_resize(const ProbabilityField& field, FrameShape target);

/// Blending weights for crop `index`: 0 outside the crop, 1 on the window the
/// next nested crop would occupy, linear in between (minimum of the row and
/// column ramps). Band widths are crop_step rows and 2 * crop_step columns.
/// Throws GeometryError if crop `index + 1` would be empty.
ScalarMap crop_kernel(int index, FrameShape base, int crop_step);

/// Separable form of crop_kernel: kernel(r, c) = min(rows[r], cols[c]).
struct KernelRamps {
  std::vector<double> rows;
  std::vector<double> cols;
};
KernelRamps crop_kernel_ramps(int index, FrameShape base, int crop_step);

/// The merged family A_0..A_n and their mean.
struct CropPyramid {
  int crop_step = 1;
  std::vector<ProbabilityField> merged;  // A_0 .. A_{n_crop}
  ProbabilityField mean;                 // average of all merged fields

  int n_crop() const noexcept { return static_cast<int>(merged.size()) - 1; }
  FrameShape shape() const noexcept { return mean.shape(); }
  int classes() const noexcept { return mean.classes(); }
};

/// Receives each A_i as soon as it is formed.
using MergedFieldVisitor = std::function<void(int index, const ProbabilityField& merged)>;

/// Streaming merge: calls `visit` for A_0..A_n and returns the mean field.
/// crop_fields[i] is the network output for crop i, either already at
/// crop_shape(i) or at the full frame shape (the shape crop 0 defines); it is
/// resampled to crop_shape(i) before blending.
ProbabilityField merge_crops(std::span<const ProbabilityField> crop_fields, int crop_step,
                             const MergedFieldVisitor& visit);

/// Materializes the whole pyramid.
CropPyramid build_pyramid(std::span<const ProbabilityField> crop_fields, int crop_step);

/// Emulates per-crop inference on a single full-frame field: crop i is the
/// restricted field resampled back to the full frame.
std::vector<ProbabilityField> simulate_crop_fields(const ProbabilityField& base, int n_crop,
                                                   int crop_step);

}  // namespace nested_metaseg
