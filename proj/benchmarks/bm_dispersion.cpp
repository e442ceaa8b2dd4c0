#include <benchmark/benchmark.h>

#include "nested_metaseg/dispersion.hpp"
#include "nested_metaseg/synth.hpp"

using namespace nested_metaseg;
namespace bm = benchmark;

static const SynthScene& scene() {
  static const SynthScene s = [] {
    SynthConfig c;
    c.frame = {256, 512};
    c.classes = 8;
    c.n_crop = 4;
    c.seed = 5;
    return generate_scene(c);
  }();
  return s;
}

static void BM_EntropyMap(bm::State& st) {
  const ProbabilityField& f = scene().crops[0];
  for (auto _ : st) bm::DoNotOptimize(entropy_map(f).values.data.data());
  st.SetItemsProcessed(st.iterations() * 256 * 512);
}
BENCHMARK(BM_EntropyMap)->Unit(bm::kMillisecond);

static void BM_KlMap(bm::State& st) {
  const CropPyramid p = build_pyramid(scene().crops, 4);
  for (auto _ : st) bm::DoNotOptimize(kl_map(p).values.data.data());
}
BENCHMARK(BM_KlMap)->Unit(bm::kMillisecond);

static void BM_AllHeatMaps(bm::State& st) {
  const CropPyramid p = build_pyramid(scene().crops, 4);
  for (auto _ : st) {
    DispersionMaps m = compute_dispersion_maps(p);
    bm::DoNotOptimize(m.kl.values.data.data());
  }
}
BENCHMARK(BM_AllHeatMaps)->Unit(bm::kMillisecond);

BENCHMARK_MAIN();
