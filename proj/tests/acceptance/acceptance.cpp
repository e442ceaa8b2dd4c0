// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance [--cli PATH] [--scratch DIR] [--only N,...]
//
// With --cli the determinism and timing criteria drive the installed command
// line tool; without it they call run_pipeline directly.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <sys/wait.h>

#include "nested_metaseg/crop_pyramid.hpp"
#include "nested_metaseg/dispersion.hpp"
#include "nested_metaseg/meta.hpp"
#include "nested_metaseg/metrics.hpp"
#include "nested_metaseg/parallel.hpp"
#include "nested_metaseg/pipeline.hpp"
#include "nested_metaseg/segmentation.hpp"
#include "nested_metaseg/synth.hpp"
#include "test_support.hpp"

using namespace nested_metaseg;
using nms_test::Matrix;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  std::string cli;
  fs::path scratch;
  int threads = 1;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path fresh(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

int run_cli(const Context& ctx, const std::string& args) {
  const std::string cmd = quote(ctx.cli) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Dataset make(const Matrix& x, const std::vector<double>& y) {
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(x[0].size()));
  d.target.resize(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x[0].size(); ++j) d.x(Eigen::Index(i), Eigen::Index(j)) = x[i][j];
    d.target(Eigen::Index(i)) = y[i];
  }
  for (std::size_t j = 0; j < x[0].size(); ++j) d.features.push_back("f" + std::to_string(j));
  return d;
}

// Intercept and coefficients of a single-layer model in raw feature units.
std::vector<double> raw_coefficients(const MetaModel& m) {
  const auto& w = m.layers.front().weights;
  std::vector<double> out{m.layers.front().bias(0)};
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    out.push_back(w(0, j) / m.scaler.scale()(j));
    out[0] -= w(0, j) * m.scaler.mean()(j) / m.scaler.scale()(j);
  }
  return out;
}

// ------------------------------------------------------------------ criteria

Outcome simplex_preservation(const Context&) {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n_crop = rng.uniform_int(0, 6);
    // the blending ramp of the last crop reaches into crop n_crop + 1, which must be non-empty
    const int k = n_crop + 1;
    const int rows = rng.uniform_int(2 * k + 1, 64), cols = rng.uniform_int(4 * k + 1, 128);
    const int step = rng.uniform_int(1, std::min((rows - 1) / (2 * k), (cols - 1) / (4 * k)));
    const int classes = rng.uniform_int(2, 8);
    std::vector<ProbabilityField> crops;
    for (int i = 0; i <= n_crop; ++i) {
      const FrameShape s = crop_shape(i, {rows, cols}, step);
      crops.push_back(nms_test::random_field(rng, s.rows, s.cols, classes, rng.uniform(0.5, 6.0)));
    }
    const CropPyramid p = build_pyramid(crops, step);
    auto check = [&](const ProbabilityField& f) {
      for (int r = 0; r < f.shape().rows; ++r) {
        for (int c = 0; c < f.shape().cols; ++c) {
          double s = 0.0;
          for (float v : f.pixel(r, c)) s += v;
          worst = std::max(worst, std::abs(s - 1.0));
        }
      }
    };
    for (const auto& a : p.merged) check(a);
    check(p.mean);
  }
  const double elapsed = seconds_since(t0);
  return {worst <= 1e-5 && elapsed < 30.0, fmt("max |sum-1| = %.2e over 500 pyramids, %.1f s", worst, elapsed)};
}

Outcome degenerate_pyramid(const Context& ctx) {
  const fs::path dir = fresh(ctx.scratch / "c2");
  SynthConfig sc;
  sc.frame = {64, 128};
  sc.n_crop = 0;
  std::string manifest = R"({"classes": 6, "c_l": 3, "n_crop": 0, "images": [)";
  std::vector<SynthScene> scenes;
  for (int i = 0; i < 4; ++i) {
    sc.seed = 40 + static_cast<std::uint64_t>(i);
    sc.rho = 0.1 * i;
    scenes.push_back(generate_scene(sc));
    const std::string id = "im" + std::to_string(i);
    save_probability_field(scenes.back().crops[0], dir / (id + ".npy"));
    save_label_map(scenes.back().labels, dir / (id + "_gt.npy"));
    manifest += (i ? ", " : "") + std::string(R"({"id": ")") + id + R"(", "probs": ")" + id + R"(.npy", "labels": ")" +
                id + R"(_gt.npy"})";
  }
  std::ofstream(dir / "manifest.json") << manifest << "]}\n";
  RunConfig rc;
  rc.runs = 2;
  rc.threads = ctx.threads;
  rc.render = false;
  rc.write_heatmaps = true;
  run_pipeline(load_manifest(dir / "manifest.json"), rc, dir / "out");

  // Direct single-field computation, no pyramid involved.
  std::vector<SegmentRecord> records;
  bool maps_equal = true;
  double worst_zero = 0.0;
  for (int i = 0; i < 4; ++i) {
    const std::string id = "im" + std::to_string(i);
    const ProbabilityField& f = scenes[static_cast<std::size_t>(i)].crops[0];
    const ScalarMap zero(f.shape().rows, f.shape().cols);
    const DispersionMaps direct{entropy_map(f),
                                margin_map(f),
                                variation_ratio_map(f),
                                HeatMap{HeatMapKind::kVarEntropy, zero},
                                HeatMap{HeatMapKind::kVarMargin, zero},
                                HeatMap{HeatMapKind::kVarVariationRatio, zero},
                                HeatMap{HeatMapKind::kKullbackLeibler, zero}};
    const fs::path mine = dir / ("direct_" + id);
    fs::create_directories(mine);
    save_dispersion_maps(direct, mine);
    const auto written = direct.ordered();
    for (const HeatMap* h : written) {
      const std::string file = heat_map_stem(h->kind) + ".npy";
      maps_equal = maps_equal && nms_test::read_bytes(mine / file) == nms_test::read_bytes(dir / "out" / "images" / id / file);
    }
    const DispersionMaps piped = load_dispersion_maps(dir / "out" / "images" / id);
    for (const HeatMap* h : {&piped.v_entropy, &piped.v_margin, &piped.v_variation, &piped.kl}) {
      for (double v : h->values.data) worst_zero = std::max(worst_zero, std::abs(v));
    }
    const SegmentMap s = connected_components(predict_labels(f));
    const auto iou = compute_iou(s, scenes[static_cast<std::size_t>(i)].labels);
    auto recs = extract_records(id, f, s, direct, &iou);
    records.insert(records.end(), recs.begin(), recs.end());
  }
  TableProvenance prov;
  prov.n_crop = 0;
  prov.crop_step = 3;
  write_metrics_csv(make_table(6, std::move(records), prov), dir / "direct.csv");
  const bool csv_equal = nms_test::read_bytes(dir / "direct.csv") == nms_test::read_bytes(dir / "out" / "metrics.csv");
  return {maps_equal && csv_equal && worst_zero <= 1e-12,
          fmt("heat maps %s, metrics.csv %s, max |v|,|K| = %.1e", maps_equal ? "identical" : "DIFFER",
              csv_equal ? "identical" : "DIFFERS", worst_zero)};
}

Outcome iou_oracle(const Context&) {
  Rng rng(303);
  int mismatches = 0, segments = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int rows = rng.uniform_int(8, 32), cols = rng.uniform_int(8, 32), classes = rng.uniform_int(2, 5);
    LabelMap gt = trial % 2 ? nms_test::random_rectangles(rng, rows, cols, classes, rng.uniform_int(2, 8))
                            : nms_test::random_labels(rng, rows, cols, classes);
    const LabelMap pred = nms_test::random_rectangles(rng, rows, cols, classes, rng.uniform_int(2, 8));
    if (trial % 5 == 0) {
      for (int c = 0; c < cols; ++c) gt.at(rows - 1, c) = kIgnoreLabel;
    }
    const auto oracle = nms_test::brute_force_iou(pred, gt);
    const auto got = compute_iou(connected_components(pred), gt);
    if (got.size() != oracle.size()) {
      ++mismatches;
      continue;
    }
    for (std::size_t k = 0; k < got.size(); ++k) {
      ++segments;
      const auto& a = got[k];
      const auto& b = oracle[k];
      const bool same = a.has_ground_truth == b.has_ground_truth &&
                        (!a.has_ground_truth || (a.intersection == b.intersection && a.union_size == b.union_size &&
                                                 a.adjusted_union == b.adjusted_union));
      mismatches += same ? 0 : 1;
    }
  }
  return {mismatches == 0, fmt("%d segments in 200 instances, %d mismatches", segments, mismatches)};
}

Outcome components_oracle(const Context&) {
  Rng rng(404);
  int bad = 0, segments = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const LabelMap m = trial % 2 ? nms_test::random_labels(rng, 16, 16, rng.uniform_int(2, 4))
                                 : nms_test::random_rectangles(rng, 16, 16, 4, 6);
    const SegmentMap s = connected_components(m);
    const std::vector<int> oracle = nms_test::flood_fill(m);
    if (s.ids != std::vector<std::int32_t>(oracle.begin(), oracle.end())) ++bad;
    for (const Segment& k : s.segments) {
      ++segments;
      if (k.size != k.interior + k.boundary) ++bad;
    }
    for (int r = 0; r < 16; ++r) {
      for (int c = 0; c < 16; ++c) {
        bool inside = r > 0 && c > 0 && r < 15 && c < 15;
        for (int dr = -1; inside && dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) inside = inside && oracle[m.index(r + dr, c + dc)] == oracle[m.index(r, c)];
        }
        if ((s.interior[s.index(r, c)] != 0) != inside) ++bad;
      }
    }
  }
  return {bad == 0, fmt("%d segments in 100 maps, %d violations", segments, bad)};
}

Outcome dispersion_ranges(const Context&) {
  int bad = 0;
  double worst_uniform = 0.0;
  for (int c = 2; c <= 64; ++c) {
    const std::vector<double> u(static_cast<std::size_t>(c), 1.0 / c);
    worst_uniform = std::max(worst_uniform, std::abs(pixel::entropy<double>(u) - 1.0));
    for (int hot = 0; hot < c; ++hot) {
      std::vector<double> p(static_cast<std::size_t>(c), 0.0);
      p[static_cast<std::size_t>(hot)] = 1.0;
      if (pixel::entropy<double>(p) != 0.0 || pixel::margin<double>(p) != 0.0 || pixel::variation_ratio<double>(p) != 0.0) ++bad;
    }
  }
  Rng rng(505);
  std::vector<double> p;
  for (int trial = 0; trial < 1'000'000; ++trial) {
    const int c = rng.uniform_int(2, 19);
    const double peak = rng.uniform(0.0, 8.0);
    p.resize(static_cast<std::size_t>(c));
    double s = 0.0;
    for (auto& v : p) s += v = std::exp(peak * rng.normal());
    for (auto& v : p) v /= s;
    const double e = pixel::entropy<double>(p), m = pixel::margin<double>(p), v = pixel::variation_ratio<double>(p);
    if (!(e >= 0.0 && e <= 1.0 && m >= 0.0 && m <= 1.0 && v >= 0.0 && v <= 1.0 - 1.0 / c)) ++bad;
  }
  return {bad == 0 && worst_uniform <= 1e-12,
          fmt("|E(uniform)-1| <= %.1e, %d violations over 1e6 vectors", worst_uniform, bad)};
}

Outcome auroc_oracle(const Context&) {
  Rng rng(606);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.uniform_int(2, 50);
    std::vector<double> s(static_cast<std::size_t>(n)), y(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = trial % 2 ? rng.normal() : std::round(rng.uniform() * 6.0);
      y[i] = rng.bernoulli(rng.uniform(0.2, 0.8)) ? 1.0 : 0.0;
    }
    worst = std::max(worst, std::abs(auroc(s, y) - nms_test::pair_count_auroc(s, y)));
  }
  const std::vector<double> labels{0, 1, 1, 0, 1};
  const double constant = auroc(std::vector<double>(5, 0.3), labels);
  return {worst <= 1e-12 && constant == 0.5, fmt("max deviation %.1e, constant scores -> %.3f", worst, constant)};
}

Outcome solver_fidelity(const Context&) {
  Rng rng(707);
  double worst_linear = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.uniform_int(10, 80), d = rng.uniform_int(1, std::min(8, n - 2));
    Matrix x(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(d)));
    std::vector<double> y(x.size());
    for (auto& row : x) {
      for (auto& v : row) v = rng.normal() * (1 + trial % 7) + rng.uniform(-3, 3);
    }
    for (auto& v : y) v = rng.uniform();
    Matrix a = x;
    for (auto& row : a) row.insert(row.begin(), 1.0);
    const std::vector<double> beta = nms_test::qr_least_squares(a, y);
    const std::vector<double> got = raw_coefficients(fit_linear(make(x, y)));
    for (std::size_t j = 0; j < beta.size(); ++j) worst_linear = std::max(worst_linear, std::abs(got[j] - beta[j]));
  }
  const double planted[3] = {-0.4, 1.2, -0.7};
  Matrix x(50000, std::vector<double>(2));
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = {rng.normal(), 2.0 * rng.normal() + 1.0};
    const double z = planted[0] + planted[1] * x[i][0] + planted[2] * x[i][1];
    y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-z))) ? 1.0 : 0.0;
  }
  const std::vector<double> got = raw_coefficients(fit_logistic(make(x, y)));
  double worst_rel = 0.0;
  for (std::size_t j = 0; j < 3; ++j) worst_rel = std::max(worst_rel, std::abs(got[j] - planted[j]) / std::abs(planted[j]));
  return {worst_linear <= 1e-8 && worst_rel <= 0.05,
          fmt("linear vs QR max |diff| = %.1e; logistic max relative error %.2f%%", worst_linear, 100 * worst_rel)};
}

Outcome mlp_gradient(const Context&) {
  Rng rng(808);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int inputs = rng.uniform_int(1, 8);
    std::vector<int> hidden(static_cast<std::size_t>(rng.uniform_int(0, 3)));
    for (auto& h : hidden) h = rng.uniform_int(1, 9);
    const Task task = trial % 2 ? Task::kClassify : Task::kRegress;
    const int n = rng.uniform_int(3, 25);
    Eigen::MatrixXd x(n, inputs);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < inputs; ++j) x(i, j) = rng.normal();
      y(i) = task == Task::kClassify ? double(rng.bernoulli(0.5)) : rng.uniform();
    }
    std::vector<DenseLayer> layers = mlp::init_layers(inputs, hidden, rng);
    for (auto& l : layers) {
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = 0.1 * rng.normal();
    }
    const double l2 = rng.uniform(0.0, 0.05);
    std::vector<DenseLayer> grad;
    mlp::loss_and_gradient(layers, x, y, task, l2, grad);
    const double h = 1e-5;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto probe = [&](double& param, double analytic) {
        const double keep = param;
        param = keep + h;
        const double up = mlp::loss(layers, x, y, task, l2);
        param = keep - h;
        const double down = mlp::loss(layers, x, y, task, l2);
        param = keep;
        const double numeric = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
      };
      for (Eigen::Index i = 0; i < layers[l].weights.size(); ++i) probe(layers[l].weights.data()[i], grad[l].weights.data()[i]);
      for (Eigen::Index i = 0; i < layers[l].bias.size(); ++i) probe(layers[l].bias.data()[i], grad[l].bias.data()[i]);
    }
  }
  return {worst <= 1e-4, fmt("max relative error %.2e over 20 configurations", worst)};
}

// 500 scenes analyzed in memory (no files), then the evaluation protocol.
Outcome synthetic_end_to_end(const Context& ctx) {
  const auto t0 = Clock::now();
  SynthDatasetConfig cfg;
  cfg.scene.frame = {128, 256};
  cfg.scene.classes = 6;
  cfg.scene.n_crop = 4;
  cfg.scenes = 500;
  cfg.rho_min = 0.0;
  cfg.rho_max = 0.5;
  cfg.seed = 1;
  std::vector<std::vector<SegmentRecord>> per_scene(static_cast<std::size_t>(cfg.scenes));
  parallel_for(per_scene.size(), ctx.threads, [&](std::size_t i) {
    const SynthScene s = generate_scene(scene_config(cfg, static_cast<int>(i)));
    per_scene[i] = analyze_image(fmt("scene_%04zu", i), s.crops, cfg.scene.crop_step, &s.labels,
                                 PredictionSource::kMean).records;
  });
  std::vector<SegmentRecord> records;
  for (auto& r : per_scene) records.insert(records.end(), r.begin(), r.end());
  TableProvenance prov;
  prov.n_crop = cfg.scene.n_crop;
  prov.crop_step = cfg.scene.crop_step;
  const MetricsTable table = make_table(cfg.scene.classes, std::move(records), prov);

  std::map<std::string, double> r;
  for (const auto& c : pearson_correlations(table)) r[c.feature] = c.r.value_or(0.0);

  const std::vector<ModelKind> kinds{ModelKind::kLogistic, ModelKind::kLinear, ModelKind::kMlpClassifier,
                                     ModelKind::kMlpRegressor};
  const std::vector<NamedFeatureSet> sets{{"all", resolve_feature_set("all", cfg.scene.classes)},
                                          {"entropy", resolve_feature_set("entropy-baseline", cfg.scene.classes)}};
  const EvalReport report = run_protocol(table, kinds, sets, 10, 0, {}, ctx.threads);
  auto val = [&](ModelKind k, const char* set) {
    for (const auto& e : report.entries) {
      if (e.kind == k && e.feature_set == set) return std::pair{e.val_first.mean, e.val_second.mean};
    }
    throw std::logic_error("missing protocol entry");
  };
  const auto [acc_all, auc_all] = val(ModelKind::kLogistic, "all");
  const auto [acc_ent, auc_ent] = val(ModelKind::kLogistic, "entropy");
  const double r2_all = val(ModelKind::kLinear, "all").second, r2_ent = val(ModelKind::kLinear, "entropy").second;
  const auto [mlp_acc, mlp_auc] = val(ModelKind::kMlpClassifier, "all");
  const double mlp_r2 = val(ModelKind::kMlpRegressor, "all").second;

  const bool a = r["mu_M"] <= -0.5 && r["S_rel"] >= 0.3;
  const bool b = acc_all - acc_ent >= 0.05 && auc_all - auc_ent >= 0.05;
  const bool c = r2_all - r2_ent >= 0.10;
  const bool d = mlp_acc >= acc_all - 0.01 && mlp_auc >= auc_all - 0.01 && mlp_r2 >= r2_all - 0.01;
  std::printf("  criterion 9 detail: %zu labeled segments from %d scenes, %.0f s\n", report.labeled_records, cfg.scenes,
              seconds_since(t0));
  std::printf("    (a) r(mu_M) = %+.3f  r(S_rel) = %+.3f                       %s\n", r["mu_M"], r["S_rel"], a ? "ok" : "FAIL");
  std::printf("    (b) ACC %.4f vs %.4f (%+.1fpp)  AUROC %.4f vs %.4f (%+.1fpp)  %s\n", acc_all, acc_ent,
              100 * (acc_all - acc_ent), auc_all, auc_ent, 100 * (auc_all - auc_ent), b ? "ok" : "FAIL");
  std::printf("    (c) R^2 %.4f vs %.4f (%+.1fpp)                          %s\n", r2_all, r2_ent, 100 * (r2_all - r2_ent),
              c ? "ok" : "FAIL");
  std::printf("    (d) MLP ACC %.4f  AUROC %.4f  R^2 %.4f                     %s\n", mlp_acc, mlp_auc, mlp_r2, d ? "ok" : "FAIL");
  return {a && b && c && d, fmt("(a) %s (b) %s (c) %s (d) %s", a ? "ok" : "fail", b ? "ok" : "fail", c ? "ok" : "fail",
                                d ? "ok" : "fail")};
}

Outcome greedy_sanity(const Context& ctx) {
  int first = 0, exact_length = 0;
  const fs::path dir = fresh(ctx.scratch / "c10");
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(1000 + static_cast<std::uint64_t>(trial));
    const int n = 240, noise = 60, planted = rng.uniform_int(0, noise);
    MetricsTable t;
    for (int j = 0; j <= noise; ++j) t.columns.push_back(j == planted ? "planted" : fmt("noise_%02d", j));
    for (int i = 0; i < n; ++i) {
      SegmentRecord r;
      r.image_id = "g";
      r.segment_id = i + 1;
      const double target = rng.bernoulli(0.35) ? 0.0 : rng.uniform(0.05, 1.0);
      for (int j = 0; j <= noise; ++j) r.features.push_back(j == planted ? target : rng.normal());
      r.iou = r.iou_adj = target;
      t.records.push_back(std::move(r));
    }
    const int requested = 1 + trial % 5;
    bool ok_first = true, ok_length = true;
    for (Task task : {Task::kClassify, Task::kRegress}) {
      const GreedyResult g = greedy_select(t, task, requested, static_cast<std::uint64_t>(trial), {}, {}, ctx.threads);
      ok_first = ok_first && !g.steps.empty() && g.steps[0].feature == "planted";
      save_greedy(g, dir / "g.json", dir / "g.csv");
      std::ifstream in(dir / "g.csv");
      int lines = 0;
      for (std::string line; std::getline(in, line);) ++lines;
      ok_length = ok_length && g.steps.size() == static_cast<std::size_t>(requested) && lines == requested + 1;
    }
    first += ok_first;
    exact_length += ok_length;
  }
  return {first == 20 && exact_length == 20,
          fmt("planted feature first in %d/20 trials, trajectory length exact in %d/20", first, exact_length)};
}

// All regular files under `root`, relative path -> bytes.
std::map<std::string, std::vector<char>> snapshot(const fs::path& root) {
  std::map<std::string, std::vector<char>> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = nms_test::read_bytes(e.path());
  }
  return out;
}

Outcome determinism(const Context& ctx) {
  const fs::path dir = fresh(ctx.scratch / "c11");
  SynthDatasetConfig cfg;
  cfg.scene.frame = {64, 128};
  cfg.scene.n_crop = 3;
  cfg.scene.ignore_rows = 4;
  cfg.scenes = 30;
  cfg.seed = 11;
  write_synth_dataset(cfg, dir / "data", ctx.threads);
  const std::string manifest = (dir / "data" / "manifest.json").string();
  for (const char* run : {"a", "b"}) {
    if (!ctx.cli.empty()) {
      const std::string args = "pipeline --manifest " + quote(manifest) + " --out " + quote((dir / run).string()) +
                               " --seed 5 --runs 3 --with-mlp --greedy 3 --write-heatmaps --write-pyramid --threads " +
                               (run[0] == 'a' ? "1" : "4");
      if (const int rc = run_cli(ctx, args); rc != 0) return {false, fmt("pipeline exited with %d", rc)};
    } else {
      RunConfig rc;
      rc.seed = 5;
      rc.runs = 3;
      rc.with_mlp = true;
      rc.greedy_max = 3;
      rc.write_heatmaps = rc.write_pyramid = true;
      rc.threads = run[0] == 'a' ? 1 : 4;
      run_pipeline(load_manifest(manifest), rc, dir / run);
    }
  }
  const auto a = snapshot(dir / "a"), b = snapshot(dir / "b");
  std::map<std::string, int> kinds;
  int differing = 0;
  for (const auto& [name, bytes] : a) {
    kinds[fs::path(name).extension().string()]++;
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) ++differing;
  }
  const bool meta = a.count("meta/report.json") && a.count("greedy/r2.csv") && a.count("meta/mlp-regressor.json");
  std::string summary;
  for (const auto& [ext, n] : kinds) summary += fmt(" %d%s", n, ext.c_str());
  return {differing == 0 && a.size() == b.size() && meta && kinds[".pgm"] > 0 && kinds[".ppm"] > 0,
          fmt("%zu files compared (%s), %d differ%s", a.size(), summary.c_str() + 1, differing,
              meta ? "" : ", meta outputs missing")};
}

Outcome performance(const Context& ctx) {
  const fs::path dir = fresh(ctx.scratch / "c12");
  SynthDatasetConfig cfg;
  cfg.scene.frame = {256, 512};
  cfg.scene.classes = 8;
  cfg.scene.n_crop = 8;
  cfg.scene.crop_step = 4;
  cfg.scenes = 50;
  cfg.seed = 12;
  write_synth_dataset(cfg, dir / "data", ctx.threads);
  const fs::path manifest = dir / "data" / "manifest.json";
  const auto t0 = Clock::now();
  if (!ctx.cli.empty()) {
    const int rc = run_cli(ctx, "pipeline --manifest " + quote(manifest.string()) + " --out " +
                                    quote((dir / "out").string()) + " --threads 16");
    if (rc != 0) return {false, fmt("pipeline exited with %d", rc)};
  } else {
    RunConfig rc;
    rc.threads = 16;
    run_pipeline(load_manifest(manifest), rc, dir / "out");
  }
  const double elapsed = seconds_since(t0);
  const bool complete = fs::exists(dir / "out" / "meta" / "report.json");
  fs::remove_all(dir / "data");
  return {elapsed < 60.0 && complete,
          fmt("%.1f s for 50 images of 256x512, C=8, N_crop=8, 16 workers on %u hardware threads%s", elapsed,
              std::thread::hardware_concurrency(), complete ? "" : ", meta outputs missing")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  Context ctx;
  std::string scratch = (fs::temp_directory_path() / "nms_acceptance").string();
  std::vector<int> only;
  app.add_option("--cli", ctx.cli, "Path to the nested-metaseg executable")->check(CLI::ExistingFile);
  app.add_option("--scratch", scratch, "Scratch directory")->capture_default_str();
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  ctx.scratch = fresh(scratch);
  ctx.threads = resolve_thread_count(0);

  const std::vector<std::pair<const char*, std::function<Outcome(const Context&)>>> criteria{
      {"simplex preservation", simplex_preservation},
      {"degenerate pyramid identity", degenerate_pyramid},
      {"IoU / IoU_adj oracle", iou_oracle},
      {"components and interior/boundary", components_oracle},
      {"dispersion ranges and closed forms", dispersion_ranges},
      {"AUROC correctness", auroc_oracle},
      {"linear / logistic solver fidelity", solver_fidelity},
      {"MLP gradient check", mlp_gradient},
      {"synthetic end-to-end", synthetic_end_to_end},
      {"greedy selection sanity", greedy_sanity},
      {"determinism", determinism},
      {"performance", performance},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(n)) continue;
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("criterion %2d %s  %s: %s\n", n, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
