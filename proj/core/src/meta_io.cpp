#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nested_metaseg/error.hpp"
#include "nested_metaseg/meta.hpp"

namespace nested_metaseg {
namespace {

using Json = nlohmann::ordered_json;

constexpr int kModelFormatVersion = 1;

Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd json_vector(const Json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Json mean_std_json(const MeanStd& m) { return Json{{"mean", m.mean}, {"std", m.std}}; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::pair<const char*, const char*> score_names(ModelKind kind) {
  return task_of(kind) == Task::kClassify ? std::pair{"acc", "auroc"} : std::pair{"sigma", "r2"};
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string cell(const MeanStd& m) { return fixed(m.mean) + " (" + fixed(m.std) + ")"; }

}  // namespace

void save_model(const MetaModel& model, const std::filesystem::path& path) {
  Json j;
  j["format"] = "nested_metaseg.model";
  j["version"] = kModelFormatVersion;
  j["kind"] = std::string(model_kind_name(model.kind));
  j["features"] = model.scaler.inputs();
  Json scaler;
  scaler["kept"] = model.scaler.kept_names();
  scaler["dropped"] = model.scaler.dropped_names();
  scaler["mean"] = vector_json(model.scaler.mean());
  scaler["scale"] = vector_json(model.scaler.scale());
  j["scaler"] = scaler;
  Json layers = Json::array();
  for (const DenseLayer& layer : model.layers) {
    Json w = Json::array();
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) w.push_back(vector_json(layer.weights.row(r).transpose()));
    layers.push_back(Json{{"weights", w}, {"bias", vector_json(layer.bias)}});
  }
  j["layers"] = layers;
  j["fit"] = Json{{"iterations", model.fit_info.iterations},
                  {"converged", model.fit_info.converged},
                  {"final_loss", model.fit_info.final_loss}};
  write_text(path, j.dump(2) + "\n");
}

MetaModel load_model(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw FormatError("model '" + path.string() + "': " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "nested_metaseg.model") {
      throw FormatError("'" + path.string() + "' is not a model file");
    }
    if (j.at("version").get<int>() != kModelFormatVersion) {
      throw FormatError(FormatProblem::kUnsupportedVersion, "model '" + path.string() + "': unsupported version");
    }
    MetaModel m;
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    auto inputs = j.at("features").get<std::vector<std::string>>();
    const auto kept_names = j.at("scaler").at("kept").get<std::vector<std::string>>();
    std::vector<std::size_t> kept;
    for (const auto& name : kept_names) {
      const auto it = std::find(inputs.begin(), inputs.end(), name);
      if (it == inputs.end()) throw FormatError("model '" + path.string() + "': unknown kept feature " + name);
      kept.push_back(static_cast<std::size_t>(it - inputs.begin()));
    }
    m.scaler = StandardScaler::from_parts(std::move(inputs), std::move(kept),
                                          json_vector(j.at("scaler").at("mean")),
                                          json_vector(j.at("scaler").at("scale")));
    Eigen::Index fan_in = static_cast<Eigen::Index>(kept_names.size());
    for (const Json& lj : j.at("layers")) {
      DenseLayer layer;
      layer.bias = json_vector(lj.at("bias"));
      const Json& w = lj.at("weights");
      layer.weights.resize(static_cast<Eigen::Index>(w.size()), fan_in);
      if (layer.weights.rows() != layer.bias.size()) throw FormatError("model '" + path.string() + "': bias size mismatch");
      for (std::size_t r = 0; r < w.size(); ++r) {
        const Eigen::VectorXd row = json_vector(w[r]);
        if (row.size() != fan_in) throw FormatError("model '" + path.string() + "': weight shape mismatch");
        layer.weights.row(static_cast<Eigen::Index>(r)) = row.transpose();
      }
      fan_in = layer.weights.rows();
      m.layers.push_back(std::move(layer));
    }
    if (m.layers.empty() || fan_in != 1) throw FormatError("model '" + path.string() + "': output must be scalar");
    if (const auto it = j.find("fit"); it != j.end()) {
      m.fit_info.iterations = it->value("iterations", 0);
      m.fit_info.converged = it->value("converged", false);
      m.fit_info.final_loss = it->value("final_loss", 0.0);
    }
    return m;
  } catch (const Json::exception& e) {
    throw FormatError("model '" + path.string() + "': " + e.what());
  }
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  Json j;
  j["runs"] = report.runs;
  j["seed"] = report.seed;
  j["labeled_records"] = report.labeled_records;
  j["baseline_accuracy"] = mean_std_json(report.baseline_accuracy);
  Json entries = Json::array();
  for (const ProtocolEntry& e : report.entries) {
    const auto [first, second] = score_names(e.kind);
    Json je;
    je["model"] = std::string(model_kind_name(e.kind));
    je["feature_set"] = e.feature_set;
    je["features"] = e.features;
    je["train"] = Json{{first, mean_std_json(e.train_first)}, {second, mean_std_json(e.train_second)}};
    je["val"] = Json{{first, mean_std_json(e.val_first)}, {second, mean_std_json(e.val_second)}};
    Json runs = Json::array();
    for (const RunScores& r : e.runs) {
      runs.push_back(Json{{"train_size", r.train_size},
                          {"val_size", r.val_size},
                          {"train", Json{{first, r.train_first}, {second, r.train_second}}},
                          {"val", Json{{first, r.val_first}, {second, r.val_second}}}});
    }
    je["per_run"] = runs;
    entries.push_back(je);
  }
  j["entries"] = entries;
  write_text(path, j.dump(2) + "\n");
}

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  out << "runs: " << report.runs << "  seed: " << report.seed
      << "  labeled segments: " << report.labeled_records << "\n";
  out << "baseline ACC (always IoU_adj > 0): " << cell(report.baseline_accuracy) << "\n\n";
  char line[256];
  std::snprintf(line, sizeof(line), "%-15s %-18s %-9s %-19s %-19s %-19s %-19s\n", "model", "features",
                "score", "train (1st)", "train (2nd)", "val (1st)", "val (2nd)");
  out << line;
  for (const ProtocolEntry& e : report.entries) {
    const auto [first, second] = score_names(e.kind);
    const std::string score = std::string(first) + "/" + second;
    std::snprintf(line, sizeof(line), "%-15s %-18s %-9s %-19s %-19s %-19s %-19s\n",
                  std::string(model_kind_name(e.kind)).c_str(), e.feature_set.c_str(),
                  score.c_str(), cell(e.train_first).c_str(),
                  cell(e.train_second).c_str(), cell(e.val_first).c_str(), cell(e.val_second).c_str());
    out << line;
  }
  out << "\n(1st, 2nd) = (ACC, AUROC) for classifiers, (sigma, R^2) for regressors; mean (std) over runs\n";
  return out.str();
}

void save_greedy(const GreedyResult& result, const std::filesystem::path& json_path,
                 const std::filesystem::path& csv_path) {
  const char* criterion = result.task == Task::kClassify ? "acc" : "r2";
  Json j;
  j["task"] = result.task == Task::kClassify ? "classify" : "regress";
  j["criterion"] = criterion;
  j["seed"] = result.seed;
  j["split"] = "single fixed split";
  j["train_size"] = result.train_size;
  j["val_size"] = result.val_size;
  Json steps = Json::array();
  std::string csv = std::string("step,feature,") + criterion + "\n";
  for (std::size_t i = 0; i < result.steps.size(); ++i) {
    steps.push_back(Json{{"step", i + 1}, {"feature", result.steps[i].feature}, {"score", result.steps[i].score}});
    Json num = result.steps[i].score;
    csv += std::to_string(i + 1) + "," + result.steps[i].feature + "," + num.dump() + "\n";
  }
  j["steps"] = steps;
  if (!json_path.empty()) write_text(json_path, j.dump(2) + "\n");
  if (!csv_path.empty()) write_text(csv_path, csv);
}

}  // namespace nested_metaseg
