#include "nested_metaseg/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "nested_metaseg/error.hpp"

namespace nested_metaseg {
namespace {

unsigned char to_byte(double unit) {
  return static_cast<unsigned char>(std::floor(std::clamp(unit, 0.0, 1.0) * 255.0 + 0.5));
}

std::string header(const char* magic, FrameShape shape) {
  return std::string(magic) + "\n" + std::to_string(shape.cols) + " " + std::to_string(shape.rows) + "\n255\n";
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

RenderScale RenderScale::fixed(double lo, double hi) {
  if (!(lo < hi)) throw ValidationError("fixed render scale needs min < max");
  return RenderScale{false, lo, hi};
}

std::vector<unsigned char> heatmap_pixels(const ScalarMap& map, const RenderScale& scale) {
  double lo = scale.min, hi = scale.max;
  if (scale.automatic) {
    if (map.data.empty()) return {};
    const auto [a, b] = std::minmax_element(map.data.begin(), map.data.end());
    lo = *a;
    hi = *b;
  } else if (!(lo < hi)) {
    throw ValidationError("fixed render scale needs min < max");
  }
  std::vector<unsigned char> out(map.data.size(), 0);
  if (!(hi > lo)) return out;
  for (std::size_t i = 0; i < map.data.size(); ++i) out[i] = to_byte((map.data[i] - lo) / (hi - lo));
  return out;
}

std::string encode_pgm(const ScalarMap& map, const RenderScale& scale) {
  const auto px = heatmap_pixels(map, scale);
  std::string bytes = header("P5", map.shape());
  bytes.append(px.begin(), px.end());
  return bytes;
}

void render_heatmap(const ScalarMap& map, const std::filesystem::path& path, const RenderScale& scale) {
  if (!map.shape().valid()) throw GeometryError("cannot render an empty heat map");
  write_bytes(path, encode_pgm(map, scale));
}

Rgb quality_color(std::optional<double> value) {
  if (!value) return {255, 255, 255};
  const double v = std::clamp(*value, 0.0, 1.0);
  return {to_byte(1.0 - v), to_byte(v), 0};
}

std::string encode_segment_quality(const SegmentMap& segments,
                                   const std::vector<std::optional<double>>& values) {
  if (values.size() != segments.segments.size()) {
    throw ValidationError("segment quality: " + std::to_string(values.size()) + " values for " +
                          std::to_string(segments.segments.size()) + " segments");
  }
  std::vector<Rgb> palette;
  palette.reserve(values.size());
  for (const auto& v : values) palette.push_back(quality_color(v));
  std::string bytes = header("P6", segments.shape());
  bytes.reserve(bytes.size() + 3 * segments.ids.size());
  for (int id : segments.ids) {
    const Rgb c = id > 0 ? palette[static_cast<std::size_t>(id - 1)] : Rgb{0, 0, 0};
    bytes.push_back(static_cast<char>(c.r));
    bytes.push_back(static_cast<char>(c.g));
    bytes.push_back(static_cast<char>(c.b));
  }
  return bytes;
}

void render_segment_quality(const SegmentMap& segments, const std::vector<std::optional<double>>& values,
                            const std::filesystem::path& path) {
  if (!segments.shape().valid()) throw GeometryError("cannot render an empty segment map");
  write_bytes(path, encode_segment_quality(segments, values));
}

}  // namespace nested_metaseg
