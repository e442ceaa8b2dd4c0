#include "nested_metaseg/pipeline.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nested_metaseg/error.hpp"
#include "nested_metaseg/parallel.hpp"
#include "nested_metaseg/render.hpp"

namespace nested_metaseg {
namespace fs = std::filesystem;
namespace {

using Json = nlohmann::ordered_json;

constexpr HeatMapKind kMapKinds[7] = {
    HeatMapKind::kMeanEntropy, HeatMapKind::kMeanMargin, HeatMapKind::kMeanVariationRatio,
    HeatMapKind::kVarEntropy,  HeatMapKind::kVarMargin,  HeatMapKind::kVarVariationRatio,
    HeatMapKind::kKullbackLeibler};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

std::string number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <class T>
void read_key(const Json& j, const char* key, T& into) {
  if (const auto it = j.find(key); it != j.end()) into = it->get<T>();
}

HeatMap* map_slot(DispersionMaps& maps, std::size_t i) {
  HeatMap* slots[7] = {&maps.mu_entropy, &maps.mu_margin, &maps.mu_variation, &maps.v_entropy,
                       &maps.v_margin,   &maps.v_variation, &maps.kl};
  return slots[i];
}

}  // namespace

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("run config: " + m); };
  if (runs < 1) fail("runs must be >= 1");
  if (crop_step && *crop_step < 1) fail("c_l must be >= 1");
  if (n_crop && *n_crop < 0) fail("n_crop must be >= 0");
  if (threads < 0) fail("threads must be >= 0");
  if (greedy_max < 0) fail("greedy_max must be >= 0");
  if (feature_sets.empty()) fail("at least one feature set is required");
  if (meta.logistic.max_iterations < 1) fail("logistic max_iterations must be >= 1");
  if (!(meta.logistic.gradient_tolerance >= 0.0)) fail("logistic gradient_tolerance must be >= 0");
  if (!(meta.linear.ridge >= 0.0)) fail("linear ridge must be >= 0");
  if (meta.mlp.epochs < 1) fail("mlp epochs must be >= 1");
  if (!(meta.mlp.learning_rate > 0.0)) fail("mlp learning_rate must be > 0");
  if (!(meta.mlp.l2 >= 0.0)) fail("mlp l2 must be >= 0");
  for (int h : meta.mlp.hidden) {
    if (h < 1) fail("mlp hidden sizes must be >= 1");
  }
}

RunConfig load_run_config(const fs::path& path, RunConfig c) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FormatError("config '" + path.string() + "': " + e.what());
  }
  try {
    if (!j.is_object()) throw FormatError("config '" + path.string() + "' must be a JSON object");
    read_key(j, "seed", c.seed);
    read_key(j, "runs", c.runs);
    if (j.contains("c_l")) c.crop_step = j["c_l"].get<int>();
    if (j.contains("n_crop")) c.n_crop = j["n_crop"].get<int>();
    read_key(j, "simulate_crops", c.simulate_crops);
    if (j.contains("predict_from")) c.prediction_source = parse_prediction_source(j["predict_from"].get<std::string>());
    read_key(j, "threads", c.threads);
    read_key(j, "with_mlp", c.with_mlp);
    read_key(j, "feature_sets", c.feature_sets);
    read_key(j, "greedy_max", c.greedy_max);
    read_key(j, "write_heatmaps", c.write_heatmaps);
    read_key(j, "write_pyramid", c.write_pyramid);
    read_key(j, "render", c.render);
    if (const auto it = j.find("logistic"); it != j.end()) {
      read_key(*it, "max_iterations", c.meta.logistic.max_iterations);
      read_key(*it, "gradient_tolerance", c.meta.logistic.gradient_tolerance);
    }
    if (const auto it = j.find("linear"); it != j.end()) read_key(*it, "ridge", c.meta.linear.ridge);
    if (const auto it = j.find("mlp"); it != j.end()) {
      read_key(*it, "hidden", c.meta.mlp.hidden);
      read_key(*it, "l2", c.meta.mlp.l2);
      read_key(*it, "learning_rate", c.meta.mlp.learning_rate);
      read_key(*it, "epochs", c.meta.mlp.epochs);
      read_key(*it, "seed", c.meta.mlp.seed);
    }
  } catch (const Json::exception& e) {
    throw FormatError("config '" + path.string() + "': " + e.what());
  }
  c.validate();
  return c;
}

std::string run_config_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["runs"] = c.runs;
  j["c_l"] = c.crop_step ? Json(*c.crop_step) : Json(nullptr);
  j["n_crop"] = c.n_crop ? Json(*c.n_crop) : Json(nullptr);
  j["simulate_crops"] = c.simulate_crops;
  j["predict_from"] = std::string(prediction_source_name(c.prediction_source));
  j["with_mlp"] = c.with_mlp;
  j["feature_sets"] = c.feature_sets;
  j["greedy_max"] = c.greedy_max;
  j["logistic"] = Json{{"max_iterations", c.meta.logistic.max_iterations},
                       {"gradient_tolerance", c.meta.logistic.gradient_tolerance}};
  j["linear"] = Json{{"ridge", c.meta.linear.ridge}};
  j["mlp"] = Json{{"hidden", c.meta.mlp.hidden},
                  {"l2", c.meta.mlp.l2},
                  {"learning_rate", c.meta.mlp.learning_rate},
                  {"epochs", c.meta.mlp.epochs},
                  {"seed", c.meta.mlp.seed}};
  // Thread count and output toggles are deliberately not recorded: they do
  // not change any result.
  return j.dump(2) + "\n";
}

CropSettings crop_settings(const DatasetManifest& manifest, const RunConfig& config) {
  CropSettings s;
  s.crop_step = config.crop_step.value_or(manifest.crop_step);
  s.n_crop = config.n_crop.value_or(manifest.n_crop);
  s.simulate = config.simulate_crops;
  if (s.crop_step < 1) throw ValidationError("c_l must be >= 1");
  if (s.n_crop < 0) throw ValidationError("n_crop must be >= 0");
  return s;
}

std::vector<ProbabilityField> load_crop_fields(const ManifestImage& image, const CropSettings& crops,
                                               int classes) {
  auto check = [&](const ProbabilityField& f, const fs::path& p) {
    if (f.classes() != classes) {
      throw ValidationError("'" + p.string() + "' has " + std::to_string(f.classes()) +
                            " classes, manifest declares " + std::to_string(classes));
    }
  };
  std::vector<ProbabilityField> fields;
  if (crops.simulate) {
    const fs::path p = image.probs ? *image.probs : image.probs_crops.at(0);
    ProbabilityField base = load_probability_field(p);
    check(base, p);
    crop_shape(crops.n_crop, base.shape(), crops.crop_step);
    return simulate_crop_fields(base, crops.n_crop, crops.crop_step);
  }
  if (image.probs_crops.empty()) {
    if (crops.n_crop != 0) {
      throw ValidationError("image '" + image.id + "' has a single probability field; use --simulate-crops or n_crop 0");
    }
    fields.push_back(load_probability_field(*image.probs));
    check(fields.back(), *image.probs);
    return fields;
  }
  if (image.probs_crops.size() < static_cast<std::size_t>(crops.n_crop) + 1) {
    throw ValidationError("image '" + image.id + "' lists " + std::to_string(image.probs_crops.size()) +
                          " crop fields, n_crop " + std::to_string(crops.n_crop) + " needs " +
                          std::to_string(crops.n_crop + 1));
  }
  for (int i = 0; i <= crops.n_crop; ++i) {
    const fs::path& p = image.probs_crops[static_cast<std::size_t>(i)];
    fields.push_back(load_probability_field(p));
    check(fields.back(), p);
  }
  return fields;
}

ImageAnalysis analyze_image(std::string id, std::span<const ProbabilityField> crop_fields, int crop_step,
                            const LabelMap* ground_truth, PredictionSource source,
                            const MergedFieldVisitor& visit) {
  if (crop_fields.empty()) throw ValidationError("image '" + id + "' has no probability fields");
  ImageAnalysis a;
  a.id = std::move(id);
  const FrameShape frame = crop_fields.front().shape();
  DispersionAccumulator acc(frame);
  ProbabilityField last;
  a.mean = merge_crops(crop_fields, crop_step, [&](int i, const ProbabilityField& merged) {
    acc.add(merged);
    if (i == 0) a.base = merged;
    if (source == PredictionSource::kMerged && i + 1 == static_cast<int>(crop_fields.size())) last = merged;
    if (visit) visit(i, merged);
  });
  a.maps = acc.finish(a.mean, a.base);
  a.prediction = predict_labels(source == PredictionSource::kMean ? a.mean : last);
  a.segments = connected_components(a.prediction);
  if (ground_truth != nullptr) a.iou = compute_iou(a.segments, *ground_truth);
  a.records = extract_records(a.id, a.mean, a.segments, a.maps, a.iou ? &*a.iou : nullptr);
  return a;
}

std::string heat_map_stem(HeatMapKind kind) { return "heat_" + std::string(heat_map_name(kind)); }

void save_dispersion_maps(const DispersionMaps& maps, const fs::path& dir) {
  make_dirs(dir);
  const auto ordered = maps.ordered();
  for (std::size_t i = 0; i < 7; ++i) {
    save_heat_map(*ordered[i], dir / (heat_map_stem(kMapKinds[i]) + ".npy"));
  }
}

DispersionMaps load_dispersion_maps(const fs::path& dir) {
  DispersionMaps maps;
  for (std::size_t i = 0; i < 7; ++i) {
    *map_slot(maps, i) = load_heat_map(dir / (heat_map_stem(kMapKinds[i]) + ".npy"), kMapKinds[i]);
  }
  return maps;
}

void save_segments(const SegmentMap& segments, const std::optional<std::vector<SegmentIoU>>& iou,
                   const fs::path& dir) {
  make_dirs(dir);
  LabelMap ids(segments.rows, segments.cols);
  ids.data = segments.ids;
  save_label_map(ids, dir / "segments.npy");
  Json table = Json::array();
  for (std::size_t k = 0; k < segments.segments.size(); ++k) {
    const Segment& s = segments.segments[k];
    Json e{{"id", s.id},
           {"class", s.label},
           {"S", s.size},
           {"S_in", s.interior},
           {"S_bd", s.boundary},
           {"box", {s.box.top, s.box.left, s.box.bottom, s.box.right}},
           {"center", {s.center_row, s.center_col}}};
    if (iou && (*iou)[k].has_ground_truth) {
      const SegmentIoU& r = (*iou)[k];
      e["intersection"] = r.intersection;
      e["union"] = r.union_size;
      e["adjusted_union"] = r.adjusted_union;
      e["iou"] = r.iou();
      e["iou_adj"] = r.iou_adj();
    }
    table.push_back(e);
  }
  Json j{{"rows", segments.rows}, {"cols", segments.cols}, {"segments", table}};
  write_text(dir / "segments.json", j.dump(2) + "\n");
}

std::string format_correlations_csv(const std::vector<FeatureCorrelation>& correlations) {
  std::string out = "feature,r\n";
  for (const auto& c : correlations) out += c.feature + "," + (c.r ? number(*c.r) : std::string()) + "\n";
  return out;
}

PipelineSummary run_pipeline(const DatasetManifest& manifest, const RunConfig& config, const fs::path& out_dir) {
  config.validate();
  validate_manifest(manifest);
  const CropSettings crops = crop_settings(manifest, config);
  const int threads = resolve_thread_count(config.threads);
  make_dirs(out_dir);
  write_text(out_dir / "run.json", run_config_json(config));

  // Per image: keep only what later stages need (segments for the predicted
  // quality figure, records for the table).
  struct Kept {
    SegmentMap segments;
    std::vector<SegmentRecord> records;
  };
  std::vector<Kept> kept(manifest.images.size());
  parallel_for(manifest.images.size(), threads, [&](std::size_t n) {
    const ManifestImage& img = manifest.images[n];
    const auto fields = load_crop_fields(img, crops, manifest.classes);
    std::optional<LabelMap> gt;
    if (img.labels) gt = load_label_map(*img.labels, manifest.classes);
    if (gt && gt->shape() != fields.front().shape()) {
      throw GeometryError("labels of '" + img.id + "' are " + to_string(gt->shape()) + ", probabilities " +
                          to_string(fields.front().shape()));
    }
    const fs::path dir = out_dir / "images" / img.id;
    if (config.write_pyramid || config.write_heatmaps || config.render) make_dirs(dir);
    MergedFieldVisitor visit;
    if (config.write_pyramid) {
      visit = [&](int i, const ProbabilityField& merged) {
        save_probability_field(merged, dir / ("A_" + std::to_string(i) + ".npy"));
      };
    }
    ImageAnalysis a = analyze_image(img.id, fields, crops.crop_step, gt ? &*gt : nullptr,
                                    config.prediction_source, visit);
    if (config.write_pyramid) save_probability_field(a.mean, dir / "A_mean.npy");
    if (config.write_heatmaps) save_dispersion_maps(a.maps, dir);
    if (config.render) {
      render_heatmap(a.maps.mu_margin.values, dir / "mu_M.pgm", RenderScale::fixed(0.0, 1.0));
      render_heatmap(a.maps.kl.values, dir / "K.pgm");
      if (a.iou) {
        std::vector<std::optional<double>> values;
        for (const auto& r : *a.iou) values.push_back(r.has_ground_truth ? std::optional(r.iou_adj()) : std::nullopt);
        render_segment_quality(a.segments, values, dir / "iou_adj.ppm");
      }
    }
    kept[n] = Kept{std::move(a.segments), std::move(a.records)};
  });

  std::vector<SegmentRecord> records;
  for (auto& k : kept) {
    records.insert(records.end(), std::make_move_iterator(k.records.begin()),
                   std::make_move_iterator(k.records.end()));
    k.records.clear();
  }
  TableProvenance prov;
  prov.n_crop = crops.n_crop;
  prov.crop_step = crops.crop_step;
  prov.prediction_source = config.prediction_source;
  const MetricsTable table = make_table(manifest.classes, std::move(records), prov);
  write_metrics_csv(table, out_dir / "metrics.csv");
  write_provenance(table, out_dir / "metrics.json");

  PipelineSummary summary;
  summary.images = manifest.images.size();
  summary.records = table.records.size();
  summary.labeled_records = table.labeled_count();

  // The meta stages need labeled records of both classes.
  try {
    write_text(out_dir / "correlations.csv", format_correlations_csv(pearson_correlations(table)));

    std::vector<ModelKind> kinds = {ModelKind::kLogistic, ModelKind::kLinear};
    if (config.with_mlp) {
      kinds.push_back(ModelKind::kMlpClassifier);
      kinds.push_back(ModelKind::kMlpRegressor);
    }
    std::vector<NamedFeatureSet> sets;
    for (const auto& name : config.feature_sets) sets.push_back({name, resolve_feature_set(name, manifest.classes)});
    const EvalReport report = run_protocol(table, kinds, sets, config.runs, config.seed, config.meta, threads);
    make_dirs(out_dir / "meta");
    save_report(report, out_dir / "meta" / "report.json");
    write_text(out_dir / "meta" / "report.txt", format_report(report));

    // Deployment models: the first feature set, fitted on every labeled record.
    const Dataset all = make_dataset(table, sets.front().features);
    std::optional<MetaModel> regressor;
    for (ModelKind kind : kinds) {
      MetaConfig mc = config.meta;
      mc.mlp.seed = Rng(config.seed ^ config.meta.mlp.seed).split(model_kind_name(kind)).next();
      MetaModel model = fit_model(kind, all, mc);
      save_model(model, out_dir / "meta" / (std::string(model_kind_name(kind)) + ".json"));
      if (kind == ModelKind::kLinear) regressor = std::move(model);
    }

    if (config.greedy_max > 0) {
      make_dirs(out_dir / "greedy");
      const int max = std::min<int>(config.greedy_max, static_cast<int>(table.columns.size()));
      save_greedy(greedy_select(table, Task::kClassify, max, config.seed, config.meta, {}, threads),
                  out_dir / "greedy" / "acc.json", out_dir / "greedy" / "acc.csv");
      save_greedy(greedy_select(table, Task::kRegress, max, config.seed, config.meta, {}, threads),
                  out_dir / "greedy" / "r2.json", out_dir / "greedy" / "r2.csv");
    }

    if (config.render && regressor) {
      // Predicted IoU_adj for every segment with a record (also unlabeled ones).
      const Eigen::Index n = static_cast<Eigen::Index>(table.records.size());
      Eigen::MatrixXd x(n, static_cast<Eigen::Index>(regressor->features().size()));
      std::vector<int> cols;
      for (const auto& f : regressor->features()) cols.push_back(table.column_index(f));
      for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
          x(i, static_cast<Eigen::Index>(j)) = table.records[static_cast<std::size_t>(i)].features[static_cast<std::size_t>(cols[j])];
        }
      }
      const Eigen::VectorXd pred = regressor->predict(x);
      std::size_t row = 0;
      for (std::size_t m = 0; m < manifest.images.size(); ++m) {
        std::vector<std::optional<double>> values(kept[m].segments.segments.size());
        while (row < table.records.size() && table.records[row].image_id == manifest.images[m].id) {
          values[static_cast<std::size_t>(table.records[row].segment_id - 1)] = pred(static_cast<Eigen::Index>(row));
          ++row;
        }
        render_segment_quality(kept[m].segments, values,
                               out_dir / "images" / manifest.images[m].id / "predicted_iou_adj.ppm");
      }
    }
    summary.meta_ran = true;
  } catch (const DegenerateError& e) {
    summary.meta_skipped_reason = e.what();
    warn(std::string("meta stages skipped: ") + e.what());
  }
  return summary;
}

}  // namespace nested_metaseg
