#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nested_metaseg/error.hpp"
#include "nested_metaseg/metrics.hpp"

namespace nested_metaseg {
namespace {

constexpr const char* kLeadingColumns[] = {"image_id", "segment_id", "class"};
constexpr const char* kTargetColumns[] = {"iou", "iou_adj"};

void put_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

template <class T>
T parse_cell(const std::string& cell, const std::string& where) {
  T v{};
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw FormatError(where + ": cannot parse '" + cell + "' as a number");
  }
  return v;
}

}  // namespace

std::string_view prediction_source_name(PredictionSource source) noexcept {
  return source == PredictionSource::kMean ? "mean" : "merged";
}

PredictionSource parse_prediction_source(std::string_view name) {
  if (name == "mean") return PredictionSource::kMean;
  if (name == "merged") return PredictionSource::kMerged;
  throw ValidationError("prediction source must be 'mean' or 'merged', got '" + std::string(name) + "'");
}

void write_metrics_csv(const MetricsTable& table, const std::filesystem::path& path) {
  std::string out;
  for (const char* c : kLeadingColumns) {
    out += c;
    out += ',';
  }
  for (const auto& c : table.columns) {
    out += c;
    out += ',';
  }
  out += kTargetColumns[0];
  out += ',';
  out += kTargetColumns[1];
  out += '\n';
  for (const auto& r : table.records) {
    if (r.image_id.find_first_of(",\n\"") != std::string::npos) {
      throw ValidationError("image id '" + r.image_id + "' cannot be written to CSV");
    }
    out += r.image_id;
    out += ',';
    out += std::to_string(r.segment_id);
    out += ',';
    out += std::to_string(r.predicted_class);
    for (double v : r.features) {
      out += ',';
      put_number(out, v);
    }
    out += ',';
    if (r.iou) put_number(out, *r.iou);
    out += ',';
    if (r.iou_adj) put_number(out, *r.iou_adj);
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

MetricsTable read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  const std::string where = path.string();
  std::string line;
  if (!std::getline(f, line)) throw FormatError(where + ": empty metrics file");
  const std::vector<std::string> header = split_line(line);
  constexpr std::size_t kExtra = 5;
  if (header.size() < kExtra + static_cast<std::size_t>(kBaseFeatureCount) + 2 ||
      header[0] != kLeadingColumns[0] || header[1] != kLeadingColumns[1] ||
      header[2] != kLeadingColumns[2] || header[header.size() - 2] != kTargetColumns[0] ||
      header.back() != kTargetColumns[1]) {
    throw FormatError(where + ": unexpected metrics header");
  }
  const int classes = static_cast<int>(header.size() - kExtra) - kBaseFeatureCount;
  MetricsTable table;
  table.columns.assign(header.begin() + 3, header.end() - 2);
  if (table.columns != feature_catalog(classes)) {
    throw FormatError(where + ": feature columns do not follow the canonical catalog");
  }
  table.provenance.classes = classes;

  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string at = where + ":" + std::to_string(line_no);
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) throw FormatError(at + ": wrong number of cells");
    SegmentRecord r;
    r.image_id = cells[0];
    r.segment_id = parse_cell<int>(cells[1], at);
    r.predicted_class = parse_cell<int>(cells[2], at);
    r.features.reserve(table.columns.size());
    for (std::size_t i = 3; i < cells.size() - 2; ++i) r.features.push_back(parse_cell<double>(cells[i], at));
    const std::string& iou = cells[cells.size() - 2];
    const std::string& adj = cells.back();
    if (!iou.empty()) r.iou = parse_cell<double>(iou, at);
    if (!adj.empty()) r.iou_adj = parse_cell<double>(adj, at);
    table.records.push_back(std::move(r));
  }
  const std::filesystem::path sidecar = std::filesystem::path(path).replace_extension(".json");
  if (std::filesystem::exists(sidecar)) {
    const TableProvenance p = read_provenance(sidecar);
    if (p.classes != classes) throw FormatError(where + ": provenance sidecar disagrees on class count");
    table.provenance = p;
  }
  return table;
}

void write_provenance(const MetricsTable& table, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["classes"] = table.provenance.classes;
  j["n_crop"] = table.provenance.n_crop;
  j["c_l"] = table.provenance.crop_step;
  j["prediction_source"] = std::string(prediction_source_name(table.provenance.prediction_source));
  j["records"] = table.records.size();
  j["labeled_records"] = table.labeled_count();
  j["columns"] = table.columns;
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << j.dump(2) << '\n';
}

TableProvenance read_provenance(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  try {
    const auto j = nlohmann::json::parse(f);
    TableProvenance p;
    p.classes = j.at("classes").get<int>();
    p.n_crop = j.at("n_crop").get<int>();
    p.crop_step = j.at("c_l").get<int>();
    p.prediction_source = parse_prediction_source(j.at("prediction_source").get<std::string>());
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": invalid provenance sidecar (" + e.what() + ")");
  }
}

}  // namespace nested_metaseg
