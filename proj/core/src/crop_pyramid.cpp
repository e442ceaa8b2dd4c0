#include "nested_metaseg/crop_pyramid.hpp"

#include <algorithm>
#include <cmath>

#include "nested_metaseg/error.hpp"

namespace nested_metaseg {
namespace {

struct AxisSample {
  int lo;
  int hi;
  double weight;  // of hi
};

// Half-pixel-center sample positions along one axis, clamped at the borders.
std::vector<AxisSample> axis_samples(int source, int target) {
  std::vector<AxisSample> out(static_cast<std::size_t>(target));
  const double scale = static_cast<double>(source) / static_cast<double>(target);
  for (int d = 0; d < target; ++d) {
    double s = (static_cast<double>(d) + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(source - 1));
    const int lo = static_cast<int>(std::floor(s));
    const int hi = std::min(lo + 1, source - 1);
    out[static_cast<std::size_t>(d)] = {lo, hi, s - lo};
  }
  return out;
}

std::vector<double> ramp(int extent, int start, int length, int band) {
  std::vector<double> r(static_cast<std::size_t>(extent), 0.0);
  for (int p = start; p < start + length; ++p) {
    const int depth = std::min(p - start, start + length - 1 - p);
    r[static_cast<std::size_t>(p)] = std::min(1.0, static_cast<double>(depth) / band);
  }
  return r;
}

void renormalize_pixels(std::vector<double>& buffer, std::span<float> out) {
  double sum = 0.0;
  for (double v : buffer) sum += v;
  for (std::size_t k = 0; k < buffer.size(); ++k) {
    out[k] = static_cast<float>(buffer[k] / sum);
  }
}

}  // namespace

FrameShape crop_shape(int index, FrameShape base, int crop_step) {
  if (index < 0) throw GeometryError("crop index must be >= 0");
  if (crop_step < 1) throw GeometryError("crop step c_l must be >= 1");
  const long rows = static_cast<long>(base.rows) - 2L * index * crop_step;
  const long cols = static_cast<long>(base.cols) - 4L * index * crop_step;
  if (rows < 1 || cols < 1) {
    throw GeometryError("crop " + std::to_string(index) + " with c_l=" + std::to_string(crop_step) +
                        " is empty for a " + to_string(base) + " frame");
  }
  return {static_cast<int>(rows), static_cast<int>(cols)};
}

CropGeometry crop_geometry(int index, FrameShape base, int crop_step) {
  CropGeometry g;
  g.index = index;
  g.crop_step = crop_step;
  g.shape = crop_shape(index, base, crop_step);
  g.top = index * crop_step;
  g.left = 2 * index * crop_step;
  return g;
}

Tensor3 restrict_crop(const Tensor3& tensor, int index, int crop_step) {
  const CropGeometry g = crop_geometry(index, tensor.shape(), crop_step);
  if (index == 0) return tensor;
  Tensor3 out(g.shape.rows, g.shape.cols, tensor.channels);
  const std::size_t row_len = static_cast<std::size_t>(g.shape.cols) * static_cast<std::size_t>(tensor.channels);
  for (int r = 0; r < g.shape.rows; ++r) {
    const float* src = tensor.data.data() + tensor.offset(g.top + r, g.left);
    std::copy(src, src + row_len, out.data.data() + out.offset(r, 0));
  }
  return out;
}

ProbabilityField restrict_crop(const ProbabilityField& field, int index, int crop_step) {
  return ProbabilityField::adopt(restrict_crop(field.tensor(), index, crop_step));
}

namespace {

template <class Emit>
void resample(const Tensor3& src, FrameShape target, Emit&& emit) {
  const auto ys = axis_samples(src.rows, target.rows);
  const auto xs = axis_samples(src.cols, target.cols);
  const std::size_t ch = static_cast<std::size_t>(src.channels);
  std::vector<double> buffer(ch);
  for (int r = 0; r < target.rows; ++r) {
    const AxisSample& y = ys[static_cast<std::size_t>(r)];
    for (int c = 0; c < target.cols; ++c) {
      const AxisSample& x = xs[static_cast<std::size_t>(c)];
      const float* a = src.data.data() + src.offset(y.lo, x.lo);
      const float* b = src.data.data() + src.offset(y.lo, x.hi);
      const float* d = src.data.data() + src.offset(y.hi, x.lo);
      const float* e = src.data.data() + src.offset(y.hi, x.hi);
      for (std::size_t k = 0; k < ch; ++k) {
        const double top = (1.0 - x.weight) * a[k] + x.weight * b[k];
        const double bottom = (1.0 - x.weight) * d[k] + x.weight * e[k];
        buffer[k] = (1.0 - y.weight) * top + y.weight * bottom;
      }
      emit(r, c, buffer);
    }
  }
}

}  // namespace

Tensor3 bilinear_resize(const Tensor3& tensor, FrameShape target) {
  if (!tensor.shape().valid() || !target.valid()) {
    throw GeometryError("bilinear resize needs non-empty source and target, got " +
                        to_string(tensor.shape()) + " -> " + to_string(target));
  }
  if (tensor.shape() == target) return tensor;
  Tensor3 out(target.rows, target.cols, tensor.channels);
  resample(tensor, target, [&](int r, int c, const std::vector<double>& v) {
    auto px = out.pixel(r, c);
    for (std::size_t k = 0; k < v.size(); ++k) px[k] = static_cast<float>(v[k]);
  });
  return out;
}

ProbabilityField bilinear_resize(const ProbabilityField& field, FrameShape target) {
  if (!target.valid()) throw GeometryError("bilinear resize target must be non-empty");
  if (field.shape() == target) return field;
  Tensor3 out(target.rows, target.cols, field.classes());
  resample(field.tensor(), target, [&](int r, int c, std::vector<double>& v) {
    renormalize_pixels(v, out.pixel(r, c));
  });
  return ProbabilityField::adopt(std::move(out));
}

KernelRamps crop_kernel_ramps(int index, FrameShape base, int crop_step) {
  const CropGeometry g = crop_geometry(index, base, crop_step);
  try {
    (void)crop_shape(index + 1, base, crop_step);
  } catch (const GeometryError&) {
    throw GeometryError("kernel for crop " + std::to_string(index) +
                        " needs a non-empty nested crop " + std::to_string(index + 1) + " in a " +
                        to_string(base) + " frame with c_l=" + std::to_string(crop_step));
  }
  KernelRamps k;
  k.rows = ramp(base.rows, g.top, g.shape.rows, crop_step);
  k.cols = ramp(base.cols, g.left, g.shape.cols, 2 * crop_step);
  return k;
}

ScalarMap crop_kernel(int index, FrameShape base, int crop_step) {
  const KernelRamps k = crop_kernel_ramps(index, base, crop_step);
  ScalarMap out(base.rows, base.cols);
  for (int r = 0; r < base.rows; ++r) {
    for (int c = 0; c < base.cols; ++c) {
      out.at(r, c) = std::min(k.rows[static_cast<std::size_t>(r)], k.cols[static_cast<std::size_t>(c)]);
    }
  }
  return out;
}

ProbabilityField merge_crops(std::span<const ProbabilityField> crop_fields, int crop_step,
                             const MergedFieldVisitor& visit) {
  if (crop_fields.empty()) throw GeometryError("merge needs at least the uncropped field");
  if (crop_step < 1) throw GeometryError("crop step c_l must be >= 1");
  const FrameShape base = crop_fields[0].shape();
  const int classes = crop_fields[0].classes();
  const std::size_t ch = static_cast<std::size_t>(classes);
  const int n_crop = static_cast<int>(crop_fields.size()) - 1;

  for (int i = 0; i <= n_crop; ++i) {
    const ProbabilityField& f = crop_fields[static_cast<std::size_t>(i)];
    if (f.classes() != classes) {
      throw GeometryError("crop " + std::to_string(i) + " has " + std::to_string(f.classes()) +
                          " classes, expected " + std::to_string(classes));
    }
    const FrameShape expect = crop_shape(i, base, crop_step);
    if (f.shape() != expect && f.shape() != base) {
      throw GeometryError("crop " + std::to_string(i) + " has shape " + to_string(f.shape()) +
                          ", expected " + to_string(expect) + " or " + to_string(base));
    }
  }

  Tensor3 current = crop_fields[0].tensor();
  std::vector<double> sum(current.data.begin(), current.data.end());
  if (visit) visit(0, crop_fields[0]);

  for (int i = 1; i <= n_crop; ++i) {
    const CropGeometry g = crop_geometry(i, base, crop_step);
    const ProbabilityField q = bilinear_resize(crop_fields[static_cast<std::size_t>(i)], g.shape);
    const KernelRamps k = crop_kernel_ramps(i, base, crop_step);
    for (int r = g.top; r < g.bottom(); ++r) {
      const double kr = k.rows[static_cast<std::size_t>(r)];
      if (kr == 0.0) continue;
      for (int c = g.left; c < g.right(); ++c) {
        const double w = std::min(kr, k.cols[static_cast<std::size_t>(c)]);
        if (w == 0.0) continue;
        const auto src = q.pixel(r - g.top, c - g.left);
        auto dst = current.pixel(r, c);
        if (w == 1.0) {
          std::copy(src.begin(), src.end(), dst.begin());
        } else {
          for (std::size_t y = 0; y < ch; ++y) {
            dst[y] = static_cast<float>(w * src[y] + (1.0 - w) * dst[y]);
          }
        }
      }
    }
    for (std::size_t p = 0; p < sum.size(); ++p) sum[p] += current.data[p];
    if (visit) visit(i, ProbabilityField::adopt(current));
  }

  Tensor3 mean(base.rows, base.cols, classes);
  const double count = static_cast<double>(n_crop + 1);
  for (std::size_t p = 0; p < sum.size(); ++p) mean.data[p] = static_cast<float>(sum[p] / count);
  return ProbabilityField::adopt(std::move(mean));
}

CropPyramid build_pyramid(std::span<const ProbabilityField> crop_fields, int crop_step) {
  CropPyramid pyramid;
  pyramid.crop_step = crop_step;
  pyramid.merged.reserve(crop_fields.size());
  pyramid.mean = merge_crops(crop_fields, crop_step, [&](int, const ProbabilityField& a) {
    pyramid.merged.push_back(a);
  });
  return pyramid;
}

std::vector<ProbabilityField> simulate_crop_fields(const ProbabilityField& base, int n_crop,
                                                   int crop_step) {
  if (n_crop < 0) throw GeometryError("n_crop must be >= 0");
  std::vector<ProbabilityField> out;
  out.reserve(static_cast<std::size_t>(n_crop) + 1);
  out.push_back(base);
  for (int i = 1; i <= n_crop; ++i) {
    out.push_back(bilinear_resize(restrict_crop(base, i, crop_step), base.shape()));
  }
  return out;
}

}  // namespace nested_metaseg
