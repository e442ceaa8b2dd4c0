#pragma once

// Minimal NPY v1.0 codec. Writes headers byte-identical to numpy.save
// (64-byte aligned, trailing space padding and newline).

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nested_metaseg::npy {

struct Header {
  std::string descr;  // e.g. "<f4"
  bool fortran_order = false;
  std::vector<std::size_t> shape;

  std::size_t element_count() const noexcept;
};

struct Array {
  Header header;
  std::vector<char> payload;
};

/// Full file image (magic, version, header, payload).
std::vector<char> encode(const Header& header, const void* payload, std::size_t payload_bytes);

/// Parses a complete file image. Throws FormatError with the matching
/// FormatProblem.
Array decode(std::vector<char> bytes, std::string_view context = "<memory>");

/// Parses the python-dict header text.
Header parse_header_text(std::string_view text);

std::size_t dtype_size(std::string_view descr);

Array read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const Header& header, const void* payload,
                std::size_t payload_bytes);

}  // namespace nested_metaseg::npy
