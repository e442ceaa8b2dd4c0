#pragma once

// Synthetic scenes with known ground truth: random shapes over a background
// class, a latent logit image with controllable corruption, and per-crop
// softmax fields that genuinely differ between crops.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nested_metaseg/tensor.hpp"
#include "nested_metaseg/tensor_io.hpp"

namespace nested_metaseg {

struct SynthConfig {
  FrameShape frame{128, 256};
  int classes = 6;          // class 0 is the background
  int min_shapes = 3;
  int max_shapes = 8;
  double beta = 8.0;        // softmax sharpness of confident regions
  int blur_radius = 2;      // box blur of the one-hot logits, pixels
  double rho = 0.2;         // noise rate in [0, 1)
  int crop_step = 4;        // c_l
  int n_crop = 4;
  int ignore_rows = 0;      // bottom rows marked IGNORE in the ground truth
  int max_spurious = 6;     // false-positive blobs, each kept with probability rho
  double logit_noise = 0.8;   // amplitude of smooth per-class logit noise
  double crop_noise = 1.0;    // amplitude of per-crop noise in uncertain regions
  std::uint64_t seed = 0;

  /// Throws ValidationError when a parameter is out of range.
  void validate() const;
};

struct SynthScene {
  LabelMap labels;                          // ground truth
  LabelMap latent;                          // corrupted labels behind the logits
  std::vector<ProbabilityField> crops;      // crop i at crop_shape(i)
};

/// Deterministic given config.seed.
SynthScene generate_scene(const SynthConfig& config);

struct SynthDatasetConfig {
  SynthConfig scene;         // template; seed and rho are set per scene
  int scenes = 10;
  double rho_min = 0.0;      // per-scene rho drawn uniformly from [rho_min, rho_max]
  double rho_max = 0.5;
  std::uint64_t seed = 0;
};

/// Per-scene config (seed and rho) of scene `index`.
SynthConfig scene_config(const SynthDatasetConfig& config, int index);

/// Writes <dir>/<id>/crop_<i>.npy, <dir>/<id>/labels.npy and
/// <dir>/manifest.json. Returns the manifest as written.
DatasetManifest write_synth_dataset(const SynthDatasetConfig& config,
                                    const std::filesystem::path& dir, int threads = 1);

}  // namespace nested_metaseg
