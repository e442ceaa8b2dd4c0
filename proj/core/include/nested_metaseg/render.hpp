#pragma once

// Binary PGM (P5) heat maps and PPM (P6) segment-quality overlays, maxval 255.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nested_metaseg/segmentation.hpp"
#include "nested_metaseg/tensor.hpp"

namespace nested_metaseg {

struct RenderScale {
  bool automatic = true;  // map min / max
  double min = 0.0;       // fixed range, requires min < max
  double max = 1.0;

  static RenderScale fixed(double lo, double hi);
};

/// Gray value floor((v - min) / (max - min) * 255 + 0.5) after clamping to
/// [min, max]. Under automatic scaling a constant map renders as 0.
std::vector<unsigned char> heatmap_pixels(const ScalarMap& map, const RenderScale& scale);
std::string encode_pgm(const ScalarMap& map, const RenderScale& scale);
void render_heatmap(const ScalarMap& map, const std::filesystem::path& path,
                    const RenderScale& scale = {});

/// Red (0) to green (1) for values in [0, 1]; (255, 255, 255) when absent.
struct Rgb {
  unsigned char r, g, b;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};
Rgb quality_color(std::optional<double> value);

/// values[id - 1] is the value of segment `id`; nullopt renders white.
/// Pixels outside every segment (id 0) render black.
std::string encode_segment_quality(const SegmentMap& segments,
                                   const std::vector<std::optional<double>>& values);
void render_segment_quality(const SegmentMap& segments,
                            const std::vector<std::optional<double>>& values,
                            const std::filesystem::path& path);

}  // namespace nested_metaseg
