#include "nested_metaseg/npy.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>

#include "nested_metaseg/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "NPY payloads are read and written as little-endian");

namespace nested_metaseg::npy {
namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kPreludeLen = 10;  // magic + version + uint16 length
constexpr std::size_t kAlign = 64;

std::string shape_text(const std::vector<std::size_t>& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  if (shape.size() == 1) out += ",";
  out += ")";
  return out;
}

class HeaderParser {
 public:
  explicit HeaderParser(std::string_view text) : text_(text) {}

  Header parse() {
    Header h;
    bool has_descr = false, has_order = false, has_shape = false;
    skip_ws();
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      const std::string key = parse_string();
      skip_ws();
      expect(':');
      skip_ws();
      if (key == "descr") {
        h.descr = parse_string();
        has_descr = true;
      } else if (key == "fortran_order") {
        h.fortran_order = parse_bool();
        has_order = true;
      } else if (key == "shape") {
        h.shape = parse_tuple();
        has_shape = true;
      } else {
        fail("unexpected header key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') ++pos_;
    }
    if (!has_descr || !has_order || !has_shape) fail("header misses descr/fortran_order/shape");
    return h;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(FormatProblem::kBadHeader, "malformed NPY header: " + what);
  }
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  std::string parse_string() {
    const char quote = peek();
    if (quote != '\'' && quote != '"') fail("expected string");
    ++pos_;
    const std::size_t end = text_.find(quote, pos_);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string s(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return s;
  }
  bool parse_bool() {
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    fail("expected True or False");
  }
  std::vector<std::size_t> parse_tuple() {
    std::vector<std::size_t> dims;
    expect('(');
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        return dims;
      }
      if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("expected dimension");
      std::size_t v = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        v = v * 10 + static_cast<std::size_t>(peek() - '0');
        ++pos_;
      }
      dims.push_back(v);
      skip_ws();
      if (peek() == ',') ++pos_;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t Header::element_count() const noexcept {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::size_t dtype_size(std::string_view descr) {
  if (descr.size() < 3) return 0;
  std::size_t n = 0;
  for (char c : descr.substr(2)) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return 0;
    n = n * 10 + static_cast<std::size_t>(c - '0');
  }
  return n;
}

Header parse_header_text(std::string_view text) { return HeaderParser(text).parse(); }

std::vector<char> encode(const Header& header, const void* payload, std::size_t payload_bytes) {
  std::string dict = "{'descr': '" + header.descr + "', 'fortran_order': " +
                     (header.fortran_order ? "True" : "False") +
                     ", 'shape': " + shape_text(header.shape) + ", }";
  // Pad with spaces so that prelude + dict + '\n' is a multiple of kAlign.
  const std::size_t unpadded = kPreludeLen + dict.size() + 1;
  const std::size_t padded = (unpadded + kAlign - 1) / kAlign * kAlign;
  dict.append(padded - unpadded, ' ');
  dict.push_back('\n');
  if (dict.size() > 0xFFFF) {
    throw FormatError(FormatProblem::kBadHeader, "NPY v1.0 header too long");
  }

  std::vector<char> out;
  out.reserve(kPreludeLen + dict.size() + payload_bytes);
  out.insert(out.end(), kMagic, kMagic + kMagicLen);
  out.push_back('\x01');
  out.push_back('\x00');
  const auto len = static_cast<std::uint16_t>(dict.size());
  out.push_back(static_cast<char>(len & 0xFF));
  out.push_back(static_cast<char>(len >> 8));
  out.insert(out.end(), dict.begin(), dict.end());
  const char* p = static_cast<const char*>(payload);
  out.insert(out.end(), p, p + payload_bytes);
  return out;
}

Array decode(std::vector<char> bytes, std::string_view context) {
  const std::string where(context);
  if (bytes.size() < kPreludeLen || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
    throw FormatError(FormatProblem::kBadMagic, where + ": not an NPY file");
  }
  if (bytes[6] != '\x01' || bytes[7] != '\x00') {
    throw FormatError(FormatProblem::kUnsupportedVersion,
                      where + ": only NPY format version 1.0 is supported");
  }
  const std::size_t header_len = static_cast<unsigned char>(bytes[8]) |
                                 (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < kPreludeLen + header_len) {
    throw FormatError(FormatProblem::kTruncated, where + ": truncated NPY header");
  }
  Array array;
  try {
    array.header = parse_header_text(
        std::string_view(bytes.data() + kPreludeLen, header_len));
  } catch (const FormatError& e) {
    throw FormatError(e.problem(), where + ": " + e.what());
  }
  const std::size_t item = dtype_size(array.header.descr);
  if (item == 0) {
    throw FormatError(FormatProblem::kWrongDtype,
                      where + ": unsupported dtype '" + array.header.descr + "'");
  }
  const std::size_t need = item * array.header.element_count();
  const std::size_t have = bytes.size() - kPreludeLen - header_len;
  if (have != need) {
    throw FormatError(FormatProblem::kTruncated, where + ": payload has " + std::to_string(have) +
                                                     " bytes, header implies " +
                                                     std::to_string(need));
  }
  array.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(kPreludeLen + header_len),
                       bytes.end());
  return array;
}

Array read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return decode(std::move(bytes), path.string());
}

void write_file(const std::filesystem::path& path, const Header& header, const void* payload,
                std::size_t payload_bytes) {
  const std::vector<char> bytes = encode(header, payload, payload_bytes);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace nested_metaseg::npy
