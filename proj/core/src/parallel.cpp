#include "nested_metaseg/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <string_view>

#include "nested_metaseg/error.hpp"

namespace nested_metaseg {

int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NESTED_METASEG_THREADS"); env != nullptr && *env != '\0') {
    const std::string_view text(env);
    int n = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), n);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || n < 1) {
      throw ValidationError("NESTED_METASEG_THREADS must be a positive integer, got '" + std::string(text) + "'");
    }
    return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace nested_metaseg
