#include "nested_metaseg/tensor_io.hpp"

#include <cmath>
#include <cstring>

#include "nested_metaseg/error.hpp"
#include "nested_metaseg/npy.hpp"

namespace nested_metaseg {
namespace {

void require_layout(const npy::Array& array, const std::filesystem::path& path,
                    std::string_view descr, std::size_t rank) {
  const std::string where = path.string();
  if (array.header.descr != descr) {
    throw FormatError(FormatProblem::kWrongDtype, where + ": expected dtype '" +
                                                      std::string(descr) + "', found '" +
                                                      array.header.descr + "'");
  }
  if (array.header.fortran_order) {
    throw FormatError(FormatProblem::kWrongOrder, where + ": Fortran-ordered arrays are not supported");
  }
  if (array.header.shape.size() != rank) {
    throw FormatError(FormatProblem::kWrongRank,
                      where + ": expected " + std::to_string(rank) + "-d array, found " +
                          std::to_string(array.header.shape.size()) + "-d");
  }
  for (std::size_t d : array.header.shape) {
    if (d == 0 || d > 0x7FFFFFFF) {
      throw FormatError(FormatProblem::kBadHeader, where + ": invalid dimension " + std::to_string(d));
    }
  }
}

template <class T>
std::vector<T> payload_as(const npy::Array& array) {
  std::vector<T> out(array.payload.size() / sizeof(T));
  std::memcpy(out.data(), array.payload.data(), out.size() * sizeof(T));
  return out;
}

Tensor3 read_tensor(const std::filesystem::path& path) {
  const npy::Array array = npy::read_file(path);
  require_layout(array, path, "<f4", 3);
  const auto& s = array.header.shape;
  return Tensor3(static_cast<int>(s[0]), static_cast<int>(s[1]), static_cast<int>(s[2]),
                 payload_as<float>(array));
}

}  // namespace

Tensor3 load_tensor(const std::filesystem::path& path) { return read_tensor(path); }

void save_tensor(const Tensor3& tensor, const std::filesystem::path& path) {
  npy::Header header{"<f4", false,
                     {static_cast<std::size_t>(tensor.rows), static_cast<std::size_t>(tensor.cols),
                      static_cast<std::size_t>(tensor.channels)}};
  npy::write_file(path, header, tensor.data.data(), tensor.data.size() * sizeof(float));
}

ProbabilityField load_probability_field(const std::filesystem::path& path) {
  Tensor3 tensor = read_tensor(path);
  if (tensor.channels < 2) {
    throw ValidationError(path.string() + ": probability field needs at least 2 classes");
  }
  const auto dev = ProbabilityField::measure(tensor);
  if (dev.out_of_range) {
    throw ValidationError(path.string() + ": probability entries outside [0, 1]");
  }
  if (dev.max_sum_error > kRenormalizeLimit) {
    throw ValidationError(path.string() + ": pixel distribution sums deviate from 1 by " +
                          std::to_string(dev.max_sum_error));
  }
  if (dev.max_sum_error > ProbabilityField::kSimplexTolerance) {
    warn(path.string() + ": renormalizing pixel distributions (max sum deviation " +
         std::to_string(dev.max_sum_error) + ")");
    const std::size_t ch = static_cast<std::size_t>(tensor.channels);
    for (std::size_t p = 0; p < tensor.data.size(); p += ch) {
      double sum = 0.0;
      for (std::size_t k = 0; k < ch; ++k) sum += tensor.data[p + k];
      for (std::size_t k = 0; k < ch; ++k) {
        tensor.data[p + k] = static_cast<float>(tensor.data[p + k] / sum);
      }
    }
  }
  return ProbabilityField(std::move(tensor));
}

void save_probability_field(const ProbabilityField& field, const std::filesystem::path& path) {
  save_tensor(field.tensor(), path);
}

LabelMap load_label_map(const std::filesystem::path& path, int classes) {
  const npy::Array array = npy::read_file(path);
  require_layout(array, path, "<i4", 2);
  LabelMap labels;
  labels.rows = static_cast<int>(array.header.shape[0]);
  labels.cols = static_cast<int>(array.header.shape[1]);
  labels.data = payload_as<std::int32_t>(array);
  try {
    labels.validate(classes);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return labels;
}

void save_label_map(const LabelMap& labels, const std::filesystem::path& path) {
  npy::Header header{"<i4", false,
                     {static_cast<std::size_t>(labels.rows), static_cast<std::size_t>(labels.cols)}};
  npy::write_file(path, header, labels.data.data(), labels.data.size() * sizeof(std::int32_t));
}

HeatMap load_heat_map(const std::filesystem::path& path, HeatMapKind kind) {
  const npy::Array array = npy::read_file(path);
  require_layout(array, path, "<f4", 2);
  HeatMap map;
  map.kind = kind;
  map.values.rows = static_cast<int>(array.header.shape[0]);
  map.values.cols = static_cast<int>(array.header.shape[1]);
  const std::vector<float> raw = payload_as<float>(array);
  map.values.data.assign(raw.begin(), raw.end());
  return map;
}

void save_heat_map(const HeatMap& map, const std::filesystem::path& path) {
  std::vector<float> raw(map.values.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<float>(map.values.data[i]);
  npy::Header header{"<f4", false,
                     {static_cast<std::size_t>(map.rows()), static_cast<std::size_t>(map.cols())}};
  npy::write_file(path, header, raw.data(), raw.size() * sizeof(float));
}

}  // namespace nested_metaseg
