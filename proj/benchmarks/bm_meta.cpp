#include <benchmark/benchmark.h>

#include "nested_metaseg/meta.hpp"
#include "nested_metaseg/random.hpp"

using namespace nested_metaseg;
namespace bm = benchmark;

static Dataset random_dataset(Eigen::Index n, Eigen::Index d, bool binary) {
  Rng rng(11);
  Dataset data;
  data.x.resize(n, d);
  data.target.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double z = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) z += (data.x(i, j) = rng.normal()) * (j % 3 ? 0.2 : -0.5);
    data.target(i) = binary ? double(rng.bernoulli(1.0 / (1.0 + std::exp(-z)))) : 1.0 / (1.0 + std::exp(-z));
  }
  for (Eigen::Index j = 0; j < d; ++j) data.features.push_back("f" + std::to_string(j));
  return data;
}

static void BM_FitLogistic(bm::State& st) {
  const Dataset d = random_dataset(st.range(0), 61, true);
  for (auto _ : st) bm::DoNotOptimize(fit_logistic(d).layers.data());
}
BENCHMARK(BM_FitLogistic)->Arg(1000)->Arg(10000)->Unit(bm::kMillisecond);

static void BM_FitLinear(bm::State& st) {
  const Dataset d = random_dataset(st.range(0), 61, false);
  for (auto _ : st) bm::DoNotOptimize(fit_linear(d).layers.data());
}
BENCHMARK(BM_FitLinear)->Arg(1000)->Arg(10000)->Unit(bm::kMillisecond);

static void BM_MlpEpochs(bm::State& st) {
  const Dataset d = random_dataset(2000, 61, false);
  MetaConfig c;
  c.mlp.epochs = static_cast<int>(st.range(0));
  for (auto _ : st) bm::DoNotOptimize(fit_mlp(d, Task::kRegress, c).layers.data());
}
BENCHMARK(BM_MlpEpochs)->Arg(50)->Unit(bm::kMillisecond);

static void BM_Auroc(bm::State& st) {
  Rng rng(2);
  std::vector<double> s(static_cast<std::size_t>(st.range(0))), y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    y[i] = rng.bernoulli(s[i]) ? 1.0 : 0.0;
  }
  for (auto _ : st) bm::DoNotOptimize(auroc(s, y));
}
BENCHMARK(BM_Auroc)->Arg(100000)->Unit(bm::kMillisecond);

BENCHMARK_MAIN();
