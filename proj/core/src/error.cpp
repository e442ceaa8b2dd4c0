#include "nested_metaseg/error.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace nested_metaseg {
namespace {

void stderr_sink(std::string_view message) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "warning: " << message << '\n';
}

std::atomic<WarningSink> g_sink{&stderr_sink};

}  // namespace

std::string_view category_name(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::kFormat:
      return "FormatError";
    case ErrorCategory::kGeometry:
      return "GeometryError";
    case ErrorCategory::kValidation:
      return "ValidationError";
    case ErrorCategory::kDegenerate:
      return "DegenerateError";
    case ErrorCategory::kIo:
      return "IoError";
  }
  return "Error";
}

void set_warning_sink(WarningSink sink) noexcept {
  g_sink.store(sink != nullptr ? sink : &stderr_sink);
}

void warn(std::string_view message) { g_sink.load()(message); }

}  // namespace nested_metaseg
