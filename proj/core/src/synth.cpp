#include "nested_metaseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "nested_metaseg/crop_pyramid.hpp"
#include "nested_metaseg/error.hpp"
#include "nested_metaseg/parallel.hpp"
#include "nested_metaseg/random.hpp"

namespace nested_metaseg {
namespace {

constexpr int kNoiseCell = 16;

// Value noise: standard normals on a coarse lattice, bilinearly interpolated.
Grid<float> smooth_noise(Rng rng, FrameShape shape, int cell) {
  const int gr = shape.rows / cell + 2;
  const int gc = shape.cols / cell + 2;
  std::vector<double> lattice(static_cast<std::size_t>(gr) * static_cast<std::size_t>(gc));
  for (double& v : lattice) v = rng.normal();
  Grid<float> out(shape.rows, shape.cols);
  for (int r = 0; r < shape.rows; ++r) {
    const double fr = static_cast<double>(r) / cell;
    const int r0 = static_cast<int>(fr);
    const double wr = fr - r0;
    for (int c = 0; c < shape.cols; ++c) {
      const double fc = static_cast<double>(c) / cell;
      const int c0 = static_cast<int>(fc);
      const double wc = fc - c0;
      auto at = [&](int i, int j) { return lattice[static_cast<std::size_t>(i) * static_cast<std::size_t>(gc) + static_cast<std::size_t>(j)]; };
      const double top = (1 - wc) * at(r0, c0) + wc * at(r0, c0 + 1);
      const double bot = (1 - wc) * at(r0 + 1, c0) + wc * at(r0 + 1, c0 + 1);
      out.at(r, c) = static_cast<float>((1 - wr) * top + wr * bot);
    }
  }
  return out;
}

struct Shape {
  bool ellipse = false;
  double cr = 0, cc = 0, hr = 0, hc = 0;  // center and half extents

  bool contains(int r, int c) const {
    const double dr = (r + 0.5 - cr) / hr;
    const double dc = (c + 0.5 - cc) / hc;
    return ellipse ? dr * dr + dc * dc <= 1.0 : std::abs(dr) <= 1.0 && std::abs(dc) <= 1.0;
  }
  int top() const { return static_cast<int>(std::floor(cr - hr)); }
  int bottom() const { return static_cast<int>(std::ceil(cr + hr)); }
  int left() const { return static_cast<int>(std::floor(cc - hc)); }
  int right() const { return static_cast<int>(std::ceil(cc + hc)); }
};

Shape random_shape(Rng& rng, FrameShape frame, double min_half, double max_half_r, double max_half_c) {
  Shape s;
  s.ellipse = rng.bernoulli(0.5);
  s.hr = rng.uniform(min_half, max_half_r);
  s.hc = rng.uniform(min_half, max_half_c);
  s.cr = rng.uniform(s.hr, frame.rows - s.hr);
  s.cc = rng.uniform(s.hc, frame.cols - s.hc);
  return s;
}

template <class Fn>
void for_pixels(const Shape& s, FrameShape frame, Fn&& fn) {
  for (int r = std::max(0, s.top()); r < std::min(frame.rows, s.bottom() + 1); ++r) {
    for (int c = std::max(0, s.left()); c < std::min(frame.cols, s.right() + 1); ++c) {
      if (s.contains(r, c)) fn(r, c);
    }
  }
}

// Separable box blur with clamped borders, one channel of a Tensor3.
void box_blur(Tensor3& t, int radius) {
  if (radius <= 0) return;
  const int C = t.channels;
  std::vector<double> line;
  auto pass = [&](int outer, int inner, auto idx) {
    line.resize(static_cast<std::size_t>(inner));
    for (int o = 0; o < outer; ++o) {
      for (int k = 0; k < C; ++k) {
        for (int i = 0; i < inner; ++i) line[static_cast<std::size_t>(i)] = t.data[idx(o, i) + static_cast<std::size_t>(k)];
        for (int i = 0; i < inner; ++i) {
          double s = 0.0;
          for (int d = -radius; d <= radius; ++d) {
            s += line[static_cast<std::size_t>(std::clamp(i + d, 0, inner - 1))];
          }
          t.data[idx(o, i) + static_cast<std::size_t>(k)] = static_cast<float>(s / (2 * radius + 1));
        }
      }
    }
  };
  pass(t.rows, t.cols, [&](int r, int c) { return t.offset(r, c); });
  pass(t.cols, t.rows, [&](int c, int r) { return t.offset(r, c); });
}

ProbabilityField softmax(const Tensor3& logits) {
  Tensor3 out(logits.rows, logits.cols, logits.channels);
  std::vector<double> e(static_cast<std::size_t>(logits.channels));
  for (int r = 0; r < logits.rows; ++r) {
    for (int c = 0; c < logits.cols; ++c) {
      const auto z = logits.pixel(r, c);
      const double m = *std::max_element(z.begin(), z.end());
      double s = 0.0;
      for (std::size_t k = 0; k < z.size(); ++k) s += e[k] = std::exp(static_cast<double>(z[k]) - m);
      auto p = out.pixel(r, c);
      for (std::size_t k = 0; k < z.size(); ++k) p[k] = static_cast<float>(e[k] / s);
    }
  }
  return ProbabilityField(std::move(out));
}

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("synth config: " + m); };
  if (!frame.valid() || frame.rows < 16 || frame.cols < 16) fail("frame must be at least 16x16");
  if (classes < 2 || classes >= kIgnoreLabel) fail("classes must be in [2, 255)");
  if (min_shapes < 0 || max_shapes < min_shapes) fail("need 0 <= min_shapes <= max_shapes");
  if (!(beta > 0.0)) fail("beta must be > 0");
  if (blur_radius < 0) fail("blur_radius must be >= 0");
  if (!(rho >= 0.0 && rho < 1.0)) fail("rho must be in [0, 1)");
  if (crop_step < 1 || n_crop < 0) fail("need c_l >= 1 and n_crop >= 0");
  if (ignore_rows < 0 || ignore_rows >= frame.rows) fail("ignore_rows must be in [0, rows)");
  if (max_spurious < 0) fail("max_spurious must be >= 0");
  if (logit_noise < 0.0 || crop_noise < 0.0) fail("noise amplitudes must be >= 0");
  crop_shape(n_crop, frame, crop_step);  // GeometryError if the innermost crop is empty
}

SynthScene generate_scene(const SynthConfig& cfg) {
  cfg.validate();
  const FrameShape frame = cfg.frame;
  const int C = cfg.classes;
  const Rng root(cfg.seed);
  Rng shapes_rng = root.split("shapes");
  Rng corrupt_rng = root.split("corruption");
  Rng spurious_rng = root.split("spurious");

  SynthScene scene;
  scene.labels = LabelMap(frame.rows, frame.cols, 0);
  Grid<float> confidence(frame.rows, frame.cols, 1.0f);  // multiplier of beta

  const double min_half = 3.0;
  const int n_shapes = shapes_rng.uniform_int(cfg.min_shapes, cfg.max_shapes);
  std::vector<std::pair<Shape, int>> shapes;
  for (int s = 0; s < n_shapes; ++s) {
    const Shape shape = random_shape(shapes_rng, frame, min_half, std::max(min_half, frame.rows / 5.0),
                                     std::max(min_half, frame.cols / 6.0));
    const int cls = shapes_rng.uniform_int(1, C - 1);
    for_pixels(shape, frame, [&](int r, int c) { scene.labels.at(r, c) = cls; });
    shapes.emplace_back(shape, cls);
  }
  scene.latent = scene.labels;

  // Corrupted shapes: a smooth blob inside the shape switches to another
  // class with reduced confidence.
  for (const auto& [shape, cls] : shapes) {
    if (!corrupt_rng.bernoulli(cfg.rho)) continue;
    const Grid<float> field = smooth_noise(corrupt_rng.split(corrupt_rng.next()), frame, 8);
    const double threshold = corrupt_rng.uniform(-0.6, 0.6);
    int alt = corrupt_rng.uniform_int(0, C - 2);
    if (alt >= cls) ++alt;
    const float conf = static_cast<float>(corrupt_rng.uniform(0.15, 0.8));
    for_pixels(shape, frame, [&](int r, int c) {
      if (field.at(r, c) > threshold && scene.latent.at(r, c) == cls) {
        scene.latent.at(r, c) = alt;
        confidence.at(r, c) = conf;
      }
    });
  }

  // Spurious blobs, mostly of the last two ("hallucination-prone") classes.
  for (int j = 0; j < cfg.max_spurious; ++j) {
    if (!spurious_rng.bernoulli(cfg.rho)) continue;
    const Shape blob = random_shape(spurious_rng, frame, 2.0, 9.0, 14.0);
    int cls = spurious_rng.bernoulli(0.75) ? C - 1 - static_cast<int>(spurious_rng.below(std::min(2, C - 1)))
                                            : spurious_rng.uniform_int(1, C - 1);
    const float conf = static_cast<float>(spurious_rng.uniform(0.2, 1.0));
    for_pixels(blob, frame, [&](int r, int c) {
      scene.latent.at(r, c) = cls;
      confidence.at(r, c) = conf;
    });
  }

  for (int r = frame.rows - cfg.ignore_rows; r < frame.rows; ++r) {
    for (int c = 0; c < frame.cols; ++c) scene.labels.at(r, c) = kIgnoreLabel;
  }

  // Latent logits.
  Tensor3 logits(frame.rows, frame.cols, C, 0.0f);
  for (int r = 0; r < frame.rows; ++r) {
    for (int c = 0; c < frame.cols; ++c) {
      logits.pixel(r, c)[static_cast<std::size_t>(scene.latent.at(r, c))] =
          static_cast<float>(cfg.beta * confidence.at(r, c));
    }
  }
  box_blur(logits, cfg.blur_radius);
  const Rng noise_root = root.split("logit-noise");
  for (int k = 0; k < C; ++k) {
    if (cfg.logit_noise == 0.0) break;
    const Grid<float> n = smooth_noise(noise_root.split(static_cast<std::uint64_t>(k)), frame, kNoiseCell);
    for (std::size_t i = 0; i < n.data.size(); ++i) {
      logits.data[i * static_cast<std::size_t>(C) + static_cast<std::size_t>(k)] +=
          static_cast<float>(cfg.logit_noise * n.data[i]);
    }
  }

  // Per-pixel uncertainty drives the per-crop noise: 0 where the top logit
  // has full confidence, growing as the margin to the runner-up shrinks.
  Grid<float> uncertainty(frame.rows, frame.cols);
  for (int r = 0; r < frame.rows; ++r) {
    for (int c = 0; c < frame.cols; ++c) {
      auto z = logits.pixel(r, c);
      float a = -1e30f, b = -1e30f;
      for (float v : z) {
        if (v > a) {
          b = a;
          a = v;
        } else if (v > b) {
          b = v;
        }
      }
      uncertainty.at(r, c) = static_cast<float>(std::exp(-static_cast<double>(a - b) / 2.0));
    }
  }

  const Rng crop_root = root.split("crops");
  for (int i = 0; i <= cfg.n_crop; ++i) {
    const CropGeometry g = crop_geometry(i, frame, cfg.crop_step);
    Tensor3 z = restrict_crop(logits, i, cfg.crop_step);
    // Zoomed-in crops resolve objects better: slightly sharper logits.
    const float gain = static_cast<float>(1.0 + 0.05 * i);
    const Rng cr = crop_root.split(static_cast<std::uint64_t>(i));
    std::vector<Grid<float>> noise;
    if (cfg.crop_noise > 0.0) {
      for (int k = 0; k < C; ++k) noise.push_back(smooth_noise(cr.split(static_cast<std::uint64_t>(k)), g.shape, 8));
    }
    for (int r = 0; r < g.shape.rows; ++r) {
      for (int c = 0; c < g.shape.cols; ++c) {
        const float u = uncertainty.at(g.top + r, g.left + c);
        auto p = z.pixel(r, c);
        for (int k = 0; k < C; ++k) {
          float v = p[static_cast<std::size_t>(k)] * gain;
          if (!noise.empty()) v += static_cast<float>(cfg.crop_noise * u * noise[static_cast<std::size_t>(k)].at(r, c));
          p[static_cast<std::size_t>(k)] = v;
        }
      }
    }
    scene.crops.push_back(softmax(z));
  }
  return scene;
}

SynthConfig scene_config(const SynthDatasetConfig& config, int index) {
  SynthConfig c = config.scene;
  Rng rng = Rng(config.seed).split(static_cast<std::uint64_t>(index));
  c.seed = rng.next();
  c.rho = config.rho_min + (config.rho_max - config.rho_min) * rng.uniform();
  return c;
}

DatasetManifest write_synth_dataset(const SynthDatasetConfig& config, const std::filesystem::path& dir,
                                    int threads) {
  if (config.scenes < 1) throw ValidationError("synth: scenes must be >= 1");
  if (!(config.rho_min >= 0.0 && config.rho_min <= config.rho_max && config.rho_max < 1.0)) {
    throw ValidationError("synth: need 0 <= rho_min <= rho_max < 1");
  }
  config.scene.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  DatasetManifest manifest;
  manifest.classes = config.scene.classes;
  manifest.crop_step = config.scene.crop_step;
  manifest.n_crop = config.scene.n_crop;
  manifest.images.resize(static_cast<std::size_t>(config.scenes));

  parallel_for(static_cast<std::size_t>(config.scenes), threads, [&](std::size_t s) {
    char id[32];
    std::snprintf(id, sizeof(id), "scene_%04zu", s);
    const std::filesystem::path sub = dir / id;
    std::filesystem::create_directories(sub);
    const SynthScene scene = generate_scene(scene_config(config, static_cast<int>(s)));
    ManifestImage& img = manifest.images[s];
    img.id = id;
    for (std::size_t i = 0; i < scene.crops.size(); ++i) {
      const auto p = sub / ("crop_" + std::to_string(i) + ".npy");
      save_probability_field(scene.crops[i], p);
      img.probs_crops.push_back(std::filesystem::absolute(p));
    }
    const auto labels = sub / "labels.npy";
    save_label_map(scene.labels, labels);
    img.labels = std::filesystem::absolute(labels);
  });
  save_manifest(manifest, dir / "manifest.json");
  return manifest;
}

}  // namespace nested_metaseg
