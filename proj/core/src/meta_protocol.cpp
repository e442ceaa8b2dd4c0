#include <algorithm>

#include "nested_metaseg/error.hpp"
#include "nested_metaseg/meta.hpp"
#include "nested_metaseg/parallel.hpp"

namespace nested_metaseg {
namespace {

std::pair<double, double> score(const MetaModel& model, const Dataset& data) {
  if (model.task() == Task::kClassify) {
    const auto s = evaluate_classifier(model, data);
    return {s.accuracy, s.auroc};
  }
  const auto s = evaluate_regressor(model, data);
  return {s.sigma, s.r2};
}

MetaConfig seeded(const MetaConfig& config, std::uint64_t seed, std::uint64_t stream) {
  MetaConfig c = config;
  c.mlp.seed = Rng(seed ^ config.mlp.seed, stream).next();
  return c;
}

}  // namespace

EvalReport run_protocol(const MetricsTable& table, std::span<const ModelKind> kinds,
                        std::span<const NamedFeatureSet> feature_sets, int runs, std::uint64_t seed,
                        const MetaConfig& config, int threads) {
  const Dataset all = make_dataset(table, table.columns);
  const std::vector<Split> splits = split_resample(static_cast<std::size_t>(all.rows()), runs, seed);

  EvalReport report;
  report.runs = runs;
  report.seed = seed;
  report.labeled_records = static_cast<std::size_t>(all.rows());

  std::vector<double> baseline;
  const Eigen::VectorXd labels = all.labels();
  for (const Split& s : splits) {
    double positives = 0.0;
    for (std::size_t i : s.val) positives += labels(static_cast<Eigen::Index>(i));
    baseline.push_back(s.val.empty() ? 0.0 : positives / static_cast<double>(s.val.size()));
  }
  report.baseline_accuracy = mean_std(baseline);

  for (ModelKind kind : kinds) {
    for (const NamedFeatureSet& fs : feature_sets) {
      ProtocolEntry e;
      e.kind = kind;
      e.feature_set = fs.name;
      e.features = fs.features;
      e.runs.resize(splits.size());
      report.entries.push_back(std::move(e));
    }
  }

  // One task per (entry, run); each writes only its own slot.
  std::vector<Dataset> columns;
  for (const auto& e : report.entries) columns.push_back(select_columns(all, e.features));
  const std::size_t n_tasks = report.entries.size() * splits.size();
  parallel_for(n_tasks, threads, [&](std::size_t t) {
    const std::size_t ei = t / splits.size();
    const std::size_t r = t % splits.size();
    ProtocolEntry& e = report.entries[ei];
    const Dataset train = select_rows(columns[ei], splits[r].train);
    const Dataset val = select_rows(columns[ei], splits[r].val);
    const MetaModel model = fit_model(e.kind, train, seeded(config, seed, t));
    RunScores rs;
    rs.train_size = splits[r].train.size();
    rs.val_size = splits[r].val.size();
    std::tie(rs.train_first, rs.train_second) = score(model, train);
    std::tie(rs.val_first, rs.val_second) = score(model, val);
    e.runs[r] = rs;
  });

  for (ProtocolEntry& e : report.entries) {
    std::vector<double> a, b, c, d;
    for (const RunScores& rs : e.runs) {
      a.push_back(rs.train_first);
      b.push_back(rs.train_second);
      c.push_back(rs.val_first);
      d.push_back(rs.val_second);
    }
    e.train_first = mean_std(a);
    e.train_second = mean_std(b);
    e.val_first = mean_std(c);
    e.val_second = mean_std(d);
  }
  return report;
}

GreedyResult greedy_select(const MetricsTable& table, Task task, int max_features,
                           std::uint64_t seed, const MetaConfig& config,
                           std::span<const std::string> candidates, int threads) {
  std::vector<std::string> pool;
  if (candidates.empty()) {
    pool = table.columns;
  } else {
    for (const auto& f : table.columns) {
      if (std::find(candidates.begin(), candidates.end(), f) != candidates.end()) pool.push_back(f);
    }
    if (pool.size() != candidates.size()) throw ValidationError("greedy selection: unknown candidate feature");
  }
  if (max_features < 1 || static_cast<std::size_t>(max_features) > pool.size()) {
    throw ValidationError("greedy selection: max_features must be in [1, " + std::to_string(pool.size()) +
                          "], got " + std::to_string(max_features));
  }

  const Dataset all = make_dataset(table, pool);
  const Split split = split_resample(static_cast<std::size_t>(all.rows()), 1, seed).front();
  const Dataset train = select_rows(all, split.train);
  const Dataset val = select_rows(all, split.val);
  const ModelKind kind = task == Task::kClassify ? ModelKind::kLogistic : ModelKind::kLinear;

  GreedyResult result;
  result.task = task;
  result.seed = seed;
  result.train_size = split.train.size();
  result.val_size = split.val.size();

  std::vector<std::string> chosen;
  std::vector<bool> used(pool.size(), false);
  for (int step = 0; step < max_features; ++step) {
    std::vector<double> scores(pool.size(), -std::numeric_limits<double>::infinity());
    parallel_for(pool.size(), threads, [&](std::size_t j) {
      if (used[j]) return;
      std::vector<std::string> trial = chosen;
      trial.push_back(pool[j]);
      const Dataset tr = select_columns(train, trial);
      const Dataset va = select_columns(val, trial);
      const MetaModel model = fit_model(kind, tr, config);
      scores[j] = task == Task::kClassify ? evaluate_classifier(model, va).accuracy
                                          : evaluate_regressor(model, va).r2;
    });
    std::size_t best = pool.size();
    for (std::size_t j = 0; j < pool.size(); ++j) {
      if (used[j]) continue;
      if (best == pool.size() || scores[j] > scores[best]) best = j;
    }
    used[best] = true;
    chosen.push_back(pool[best]);
    result.steps.push_back({pool[best], scores[best]});
  }
  return result;
}

}  // namespace nested_metaseg
