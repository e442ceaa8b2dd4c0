#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nested_metaseg {

/// Error category, mapped one-to-one onto the CLI exit codes.
enum class ErrorCategory {
  kFormat = 2,      // malformed or unsupported file contents
  kGeometry = 3,    // crop / frame / shape inconsistencies
  kValidation = 4,  // value-level invariant violations
  kDegenerate = 5,  // data that cannot support the requested fit
  kIo = 6,          // filesystem failures
};

std::string_view category_name(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

/// Distinguishes the ways a tensor file can be rejected.
enum class FormatProblem {
  kBadMagic,
  kUnsupportedVersion,
  kBadHeader,
  kWrongDtype,
  kWrongOrder,
  kWrongRank,
  kTruncated,
  kBadSyntax,
};

class FormatError : public Error {
 public:
  FormatError(FormatProblem problem, const std::string& message)
      : Error(ErrorCategory::kFormat, message), problem_(problem) {}
  explicit FormatError(const std::string& message)
      : FormatError(FormatProblem::kBadSyntax, message) {}

  FormatProblem problem() const noexcept { return problem_; }

 private:
  FormatProblem problem_;
};

class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& message)
      : Error(ErrorCategory::kGeometry, message) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorCategory::kValidation, message) {}
};

class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& message)
      : Error(ErrorCategory::kDegenerate, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message)
      : Error(ErrorCategory::kIo, message) {}
};

/// Warnings (renormalized inputs, dropped features) go through a single sink
/// so tools can redirect or silence them.
using WarningSink = void (*)(std::string_view message);

void set_warning_sink(WarningSink sink) noexcept;
void warn(std::string_view message);

}  // namespace nested_metaseg
