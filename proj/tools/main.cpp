// nested-metaseg: command line front end for the nested_metaseg library.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nested_metaseg/error.hpp"
#include "nested_metaseg/meta.hpp"
#include "nested_metaseg/metrics.hpp"
#include "nested_metaseg/parallel.hpp"
#include "nested_metaseg/pipeline.hpp"
#include "nested_metaseg/render.hpp"
#include "nested_metaseg/synth.hpp"

namespace fs = std::filesystem;
using namespace nested_metaseg;

namespace {

// Options shared by several subcommands. Values given on the command line
// win over the --config file.
struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  int runs = 10;
  int threads = 0;
  int crop_step = 0;
  int n_crop = -1;
  bool simulate_crops = false;
  std::string predict_from = "mean";
  CLI::App* command = nullptr;  // the parsed subcommand

  bool given(const char* name) const {
    const CLI::Option* o = command->get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  }
};

void add_config(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app->add_option("--threads", c.threads,
                                  "Worker threads (default: $NESTED_METASEG_THREADS, else all cores)")
      ->check(CLI::PositiveNumber);
}

void add_seed(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Random seed")->capture_default_str();
}

void add_protocol(CLI::App* app, Common& c) {
  add_seed(app, c);
  app->add_option("--runs", c.runs, "Resampled train/val runs")->check(CLI::PositiveNumber)->capture_default_str();
}

void add_crops(CLI::App* app, Common& c) {
  app->add_option("--c-l", c.crop_step, "Crop step c_l (overrides the manifest)")->check(CLI::PositiveNumber);
  app->add_option("--n-crop", c.n_crop, "Number of nested crops (overrides the manifest)")->check(CLI::NonNegativeNumber);
  app->add_flag("--simulate-crops", c.simulate_crops, "Simulate crops from one full-frame field per image");
}

void add_prediction(CLI::App* app, Common& c) {
  app->add_option("--predict-from", c.predict_from, "Prediction source")
      ->check(CLI::IsMember({"mean", "merged"}))
      ->capture_default_str();
}

RunConfig resolve(const Common& c) {
  RunConfig rc;
  if (!c.config_path.empty()) rc = load_run_config(c.config_path);
  if (c.given("--seed")) rc.seed = c.seed;
  if (c.given("--runs")) rc.runs = c.runs;
  if (c.given("--threads")) rc.threads = c.threads;
  if (c.given("--c-l")) rc.crop_step = c.crop_step;
  if (c.given("--n-crop")) rc.n_crop = c.n_crop;
  if (c.given("--simulate-crops")) rc.simulate_crops = true;
  if (c.given("--predict-from")) rc.prediction_source = parse_prediction_source(c.predict_from);
  rc.validate();
  return rc;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
}

fs::path image_dir(const fs::path& work, const ManifestImage& img) { return work / img.id; }

std::optional<LabelMap> load_truth(const DatasetManifest& m, const ManifestImage& img) {
  if (!img.labels) return std::nullopt;
  return load_label_map(*img.labels, m.classes);
}

// Pyramid files written by merge-crops.
CropPyramid load_pyramid(const fs::path& dir, int n_crop, int crop_step) {
  CropPyramid p;
  p.crop_step = crop_step;
  for (int i = 0; i <= n_crop; ++i) p.merged.push_back(load_probability_field(dir / ("A_" + std::to_string(i) + ".npy")));
  p.mean = load_probability_field(dir / "A_mean.npy");
  return p;
}

// ------------------------------------------------------------------ commands

struct SynthArgs {
  std::string out;
  int scenes = 10;
  int rows = 128, cols = 256, classes = 6;
  int crop_step = 4, n_crop = 4;
  double rho_min = 0.0, rho_max = 0.5, beta = 8.0;
  int blur = 2, ignore_rows = 0;
};

void cmd_synth(const SynthArgs& a, const Common& c) {
  // --c-l / --n-crop here describe the generated data, not run overrides
  RunConfig rc;
  if (!c.config_path.empty()) rc = load_run_config(c.config_path);
  if (c.given("--seed")) rc.seed = c.seed;
  if (c.given("--threads")) rc.threads = c.threads;
  SynthDatasetConfig cfg;
  cfg.scene.frame = {a.rows, a.cols};
  cfg.scene.classes = a.classes;
  cfg.scene.crop_step = a.crop_step;
  cfg.scene.n_crop = a.n_crop;
  cfg.scene.beta = a.beta;
  cfg.scene.blur_radius = a.blur;
  cfg.scene.ignore_rows = a.ignore_rows;
  cfg.scenes = a.scenes;
  cfg.rho_min = a.rho_min;
  cfg.rho_max = a.rho_max;
  cfg.seed = rc.seed;
  const DatasetManifest m = write_synth_dataset(cfg, a.out, resolve_thread_count(rc.threads));
  std::printf("wrote %zu scenes to %s\n", m.images.size(), (fs::path(a.out) / "manifest.json").c_str());
}

void cmd_merge(const std::string& manifest_path, const std::string& work, const Common& c) {
  const RunConfig rc = resolve(c);
  const DatasetManifest m = load_manifest(manifest_path);
  const CropSettings crops = crop_settings(m, rc);
  parallel_for(m.images.size(), resolve_thread_count(rc.threads), [&](std::size_t n) {
    const ManifestImage& img = m.images[n];
    const fs::path dir = image_dir(work, img);
    fs::create_directories(dir);
    const auto fields = load_crop_fields(img, crops, m.classes);
    const ProbabilityField mean = merge_crops(fields, crops.crop_step, [&](int i, const ProbabilityField& a) {
      save_probability_field(a, dir / ("A_" + std::to_string(i) + ".npy"));
    });
    save_probability_field(mean, dir / "A_mean.npy");
  });
  std::printf("merged %zu images (c_l=%d, n_crop=%d) into %s\n", m.images.size(), crops.crop_step, crops.n_crop,
              work.c_str());
}

void cmd_heatmaps(const std::string& manifest_path, const std::string& work, const Common& c) {
  const RunConfig rc = resolve(c);
  const DatasetManifest m = load_manifest(manifest_path);
  const CropSettings crops = crop_settings(m, rc);
  parallel_for(m.images.size(), resolve_thread_count(rc.threads), [&](std::size_t n) {
    const fs::path dir = image_dir(work, m.images[n]);
    save_dispersion_maps(compute_dispersion_maps(load_pyramid(dir, crops.n_crop, crops.crop_step)), dir);
  });
  std::printf("wrote 7 heat maps for %zu images\n", m.images.size());
}

void cmd_segments(const std::string& manifest_path, const std::string& work, const Common& c) {
  const RunConfig rc = resolve(c);
  const DatasetManifest m = load_manifest(manifest_path);
  const CropSettings crops = crop_settings(m, rc);
  parallel_for(m.images.size(), resolve_thread_count(rc.threads), [&](std::size_t n) {
    const ManifestImage& img = m.images[n];
    const fs::path dir = image_dir(work, img);
    const fs::path source = rc.prediction_source == PredictionSource::kMean
                                ? dir / "A_mean.npy"
                                : dir / ("A_" + std::to_string(crops.n_crop) + ".npy");
    const LabelMap pred = predict_labels(load_probability_field(source));
    save_label_map(pred, dir / "pred_labels.npy");
    const SegmentMap seg = connected_components(pred);
    std::optional<std::vector<SegmentIoU>> iou;
    if (const auto gt = load_truth(m, img)) iou = compute_iou(seg, *gt);
    save_segments(seg, iou, dir);
  });
  std::printf("segmented %zu images\n", m.images.size());
}

void cmd_extract(const std::string& manifest_path, const std::string& work, const std::string& out,
                 const Common& c) {
  const RunConfig rc = resolve(c);
  const DatasetManifest m = load_manifest(manifest_path);
  const CropSettings crops = crop_settings(m, rc);
  std::vector<std::vector<SegmentRecord>> per_image(m.images.size());
  parallel_for(m.images.size(), resolve_thread_count(rc.threads), [&](std::size_t n) {
    const ManifestImage& img = m.images[n];
    const fs::path dir = image_dir(work, img);
    // Heat maps are recomputed from the stored pyramid: the heat_*.npy files
    // are float32 exports, the metrics use full precision.
    const CropPyramid pyramid = load_pyramid(dir, crops.n_crop, crops.crop_step);
    const DispersionMaps maps = compute_dispersion_maps(pyramid);
    const LabelMap pred = predict_labels(pyramid, rc.prediction_source);
    const SegmentMap seg = connected_components(pred);
    std::optional<std::vector<SegmentIoU>> iou;
    if (const auto gt = load_truth(m, img)) iou = compute_iou(seg, *gt);
    per_image[n] = extract_records(img.id, pyramid.mean, seg, maps, iou ? &*iou : nullptr);
  });
  std::vector<SegmentRecord> records;
  for (auto& r : per_image) records.insert(records.end(), r.begin(), r.end());
  TableProvenance prov;
  prov.n_crop = crops.n_crop;
  prov.crop_step = crops.crop_step;
  prov.prediction_source = rc.prediction_source;
  const MetricsTable table = make_table(m.classes, std::move(records), prov);
  const fs::path csv(out);
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  write_metrics_csv(table, csv);
  fs::path sidecar = csv;
  sidecar.replace_extension(".json");
  write_provenance(table, sidecar);
  std::printf("%zu segment records (%zu labeled) -> %s\n", table.records.size(), table.labeled_count(), out.c_str());
}

void cmd_correlate(const std::string& metrics, const std::string& out) {
  const MetricsTable table = read_metrics_csv(metrics);
  const auto corr = pearson_correlations(table);
  if (!out.empty()) write_file(out, format_correlations_csv(corr));
  std::printf("%-14s %10s\n", "feature", "r(IoU_adj)");
  for (const auto& fc : corr) {
    if (fc.r) {
      std::printf("%-14s %+10.4f\n", fc.feature.c_str(), *fc.r);
    } else {
      std::printf("%-14s %10s\n", fc.feature.c_str(), "undefined");
    }
  }
}

struct TrainArgs {
  std::string metrics, model = "logistic", features = "all", out_model, report;
};

void cmd_train(const TrainArgs& a, const Common& c) {
  const RunConfig rc = resolve(c);
  const MetricsTable table = read_metrics_csv(a.metrics);
  const ModelKind kind = parse_model_kind(a.model);
  const std::vector<ModelKind> kinds = {kind};
  const std::vector<NamedFeatureSet> sets = {{a.features, resolve_feature_set(a.features, table.provenance.classes)}};
  const int threads = resolve_thread_count(rc.threads);
  const EvalReport report = run_protocol(table, kinds, sets, rc.runs, rc.seed, rc.meta, threads);
  std::fputs(format_report(report).c_str(), stdout);
  if (!a.report.empty()) {
    save_report(report, a.report);
    fs::path txt = a.report;
    txt.replace_extension(".txt");
    write_file(txt, format_report(report));
  }
  if (!a.out_model.empty()) {
    MetaConfig mc = rc.meta;
    mc.mlp.seed = Rng(rc.seed ^ rc.meta.mlp.seed).split(model_kind_name(kind)).next();
    save_model(fit_model(kind, make_dataset(table, sets.front().features), mc), a.out_model);
  }
}

struct GreedyArgs {
  std::string metrics, criterion = "r2", out, candidates;
  int max = 12;
};

void cmd_greedy(const GreedyArgs& a, const Common& c) {
  const RunConfig rc = resolve(c);
  const MetricsTable table = read_metrics_csv(a.metrics);
  const Task task = a.criterion == "acc" ? Task::kClassify : Task::kRegress;
  std::vector<std::string> candidates;
  if (!a.candidates.empty()) candidates = resolve_feature_set(a.candidates, table.provenance.classes);
  const GreedyResult r = greedy_select(table, task, a.max, rc.seed, rc.meta, candidates, resolve_thread_count(rc.threads));
  fs::path prefix(a.out);
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  save_greedy(r, fs::path(a.out + ".json"), fs::path(a.out + ".csv"));
  std::printf("step  feature         %s\n", a.criterion.c_str());
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    std::printf("%4zu  %-14s  %.4f\n", i + 1, r.steps[i].feature.c_str(), r.steps[i].score);
  }
}

struct RenderArgs {
  std::string heatmap, segments, value = "iou_adj", scale = "auto", out;
};

RenderScale parse_scale(const std::string& s) {
  if (s == "auto") return {};
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ValidationError("--scale must be 'auto' or 'min,max'");
  try {
    return RenderScale::fixed(std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1)));
  } catch (const std::logic_error&) {
    throw ValidationError("--scale must be 'auto' or 'min,max', got '" + s + "'");
  }
}

void cmd_render(const RenderArgs& a) {
  if (a.heatmap.empty() == a.segments.empty()) throw ValidationError("render needs exactly one of --heatmap or --segments");
  if (!a.heatmap.empty()) {
    render_heatmap(load_heat_map(a.heatmap).values, a.out, parse_scale(a.scale));
    return;
  }
  // Segment directory written by the `segments` command.
  const fs::path dir(a.segments);
  LabelMap ids = load_label_map(dir / "segments.npy", std::numeric_limits<std::int32_t>::max() - 1);
  std::ifstream in(dir / "segments.json");
  if (!in) throw IoError("cannot open '" + (dir / "segments.json").string() + "'");
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("segments")) throw FormatError("malformed segments.json in " + dir.string());
  SegmentMap seg;
  seg.rows = ids.rows;
  seg.cols = ids.cols;
  seg.ids = ids.data;
  std::vector<std::optional<double>> values;
  for (const auto& s : j["segments"]) {
    Segment sg;
    sg.id = s.at("id").get<int>();
    seg.segments.push_back(sg);
    values.push_back(s.contains(a.value) ? std::optional<double>(s[a.value].get<double>()) : std::nullopt);
  }
  render_segment_quality(seg, values, a.out);
}

struct PipelineArgs {
  std::string manifest, out;
  bool with_mlp = false, write_heatmaps = false, write_pyramid = false, no_render = false;
  int greedy = -1;
  std::vector<std::string> feature_sets;
};

void cmd_pipeline(const PipelineArgs& a, const Common& c) {
  RunConfig rc = resolve(c);
  if (a.with_mlp) rc.with_mlp = true;
  if (a.write_heatmaps) rc.write_heatmaps = true;
  if (a.write_pyramid) rc.write_pyramid = true;
  if (a.no_render) rc.render = false;
  if (a.greedy >= 0) rc.greedy_max = a.greedy;
  if (!a.feature_sets.empty()) rc.feature_sets = a.feature_sets;
  rc.validate();
  const DatasetManifest m = load_manifest(a.manifest);
  const PipelineSummary s = run_pipeline(m, rc, a.out);
  std::printf("%zu images, %zu segment records (%zu labeled)%s -> %s\n", s.images, s.records, s.labeled_records,
              s.meta_ran ? "" : ", meta stages skipped", a.out.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested-crop uncertainty heat maps, segment-wise metrics and meta models "
               "for stored segmentation softmax outputs."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "nested-metaseg 0.1.0");
  Common common;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset (crop fields, labels, manifest)");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--scenes", synth.scenes, "Number of scenes")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--rows", synth.rows, "Frame rows")->capture_default_str();
  s->add_option("--cols", synth.cols, "Frame columns")->capture_default_str();
  s->add_option("--classes", synth.classes, "Number of classes C")->capture_default_str();
  s->add_option("--c-l", synth.crop_step, "Crop step c_l")->capture_default_str();
  s->add_option("--n-crop", synth.n_crop, "Number of nested crops")->capture_default_str();
  s->add_option("--rho-min", synth.rho_min, "Lowest per-scene noise rate")->capture_default_str();
  s->add_option("--rho-max", synth.rho_max, "Highest per-scene noise rate")->capture_default_str();
  s->add_option("--beta", synth.beta, "Softmax sharpness")->capture_default_str();
  s->add_option("--blur", synth.blur, "Boundary blur radius")->capture_default_str();
  s->add_option("--ignore-rows", synth.ignore_rows, "Bottom rows marked IGNORE")->capture_default_str();
  add_seed(s, common);
  add_config(s, common);

  std::string manifest, work, out;
  auto stage = [&](const char* name, const char* help) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("--manifest", manifest, "Dataset manifest (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--work", work, "Working directory, one subdirectory per image")->required();
    add_crops(cmd, common);
    add_config(cmd, common);
    return cmd;
  };
  auto* merge = stage("merge-crops", "Merge per-crop fields into A_0..A_n and the mean A_bar");
  auto* heat = stage("heatmaps", "Compute the seven heat maps from merged fields");
  auto* segs = stage("segments", "Predict labels, extract segments and IoU / IoU_adj");
  add_prediction(segs, common);
  auto* extract = stage("extract-metrics", "Aggregate segment-wise metrics into a CSV table");
  add_prediction(extract, common);
  extract->add_option("--out", out, "Metrics CSV (a .json sidecar is written next to it)")->required();

  std::string metrics, corr_out;
  auto* corr = app.add_subcommand("correlate", "Pearson correlation of every metric with IoU_adj");
  corr->add_option("--metrics", metrics, "Metrics CSV")->required()->check(CLI::ExistingFile);
  corr->add_option("--out", corr_out, "Write feature,r CSV");

  TrainArgs train;
  auto* tm = app.add_subcommand("train-meta", "Evaluate a meta model under the resampling protocol");
  tm->add_option("--metrics", train.metrics, "Metrics CSV")->required()->check(CLI::ExistingFile);
  tm->add_option("--model", train.model, "logistic, linear, mlp-classifier or mlp-regressor")
      ->check(CLI::IsMember({"logistic", "linear", "mlp-classifier", "mlp-regressor"}))
      ->capture_default_str();
  tm->add_option("--features", train.features, "Feature set name or comma list")->capture_default_str();
  tm->add_option("--out-model", train.out_model, "Write a model fitted on all labeled records (JSON)");
  tm->add_option("--report", train.report, "Write the evaluation report (JSON, plus .txt)");
  add_protocol(tm, common);
  add_config(tm, common);

  GreedyArgs greedy;
  auto* gs = app.add_subcommand("select-greedy", "Greedy forward metric selection");
  gs->add_option("--metrics", greedy.metrics, "Metrics CSV")->required()->check(CLI::ExistingFile);
  gs->add_option("--criterion", greedy.criterion, "acc (logistic) or r2 (linear)")
      ->check(CLI::IsMember({"acc", "r2"}))
      ->capture_default_str();
  gs->add_option("--max", greedy.max, "Number of selection steps")->check(CLI::PositiveNumber)->capture_default_str();
  gs->add_option("--candidates", greedy.candidates, "Restrict candidates to a feature set");
  gs->add_option("--out", greedy.out, "Output prefix (writes PREFIX.json and PREFIX.csv)")->required();
  add_seed(gs, common);
  add_config(gs, common);

  RenderArgs render;
  auto* rd = app.add_subcommand("render", "Render a heat map (PGM) or segment values (PPM)");
  rd->add_option("--heatmap", render.heatmap, "Heat map NPY file")->check(CLI::ExistingFile);
  rd->add_option("--segments", render.segments, "Image directory written by `segments`")->check(CLI::ExistingDirectory);
  rd->add_option("--value", render.value, "Segment value to color: iou or iou_adj")
      ->check(CLI::IsMember({"iou", "iou_adj"}))
      ->capture_default_str();
  rd->add_option("--scale", render.scale, "auto or min,max")->capture_default_str();
  rd->add_option("--out", render.out, "Output image")->required();

  PipelineArgs pipe;
  auto* pl = app.add_subcommand("pipeline", "Run every stage for a manifest");
  pl->add_option("--manifest", pipe.manifest, "Dataset manifest (JSON)")->required()->check(CLI::ExistingFile);
  pl->add_option("--out", pipe.out, "Output directory")->required();
  pl->add_flag("--with-mlp", pipe.with_mlp, "Also evaluate the MLP meta models");
  pl->add_flag("--write-heatmaps", pipe.write_heatmaps, "Write heat_*.npy per image");
  pl->add_flag("--write-pyramid", pipe.write_pyramid, "Write A_i.npy and A_mean.npy per image");
  pl->add_flag("--no-render", pipe.no_render, "Skip PGM / PPM figures");
  pl->add_option("--greedy", pipe.greedy, "Greedy selection steps (0 disables)")->check(CLI::NonNegativeNumber);
  pl->add_option("--feature-sets", pipe.feature_sets, "Feature sets for the protocol")->delimiter(',');
  add_protocol(pl, common);
  add_crops(pl, common);
  add_prediction(pl, common);
  add_config(pl, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  for (CLI::App* sub : app.get_subcommands()) common.command = sub;
  try {
    if (s->parsed()) cmd_synth(synth, common);
    else if (merge->parsed()) cmd_merge(manifest, work, common);
    else if (heat->parsed()) cmd_heatmaps(manifest, work, common);
    else if (segs->parsed()) cmd_segments(manifest, work, common);
    else if (extract->parsed()) cmd_extract(manifest, work, out, common);
    else if (corr->parsed()) cmd_correlate(metrics, corr_out);
    else if (tm->parsed()) cmd_train(train, common);
    else if (gs->parsed()) cmd_greedy(greedy, common);
    else if (rd->parsed()) cmd_render(render);
    else if (pl->parsed()) cmd_pipeline(pipe, common);
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(category_name(e.category())).c_str(), e.what());
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error [io]: %s\n", e.what());
    return static_cast<int>(ErrorCategory::kIo);
  }
  return 0;
}
