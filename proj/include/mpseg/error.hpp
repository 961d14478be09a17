#pragma once

#include <stdexcept>
#include <string>

namespace mpseg {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kCheckFailure = 1,
  kConfig = 2,
  kIo = 3,
  kNumeric = 4,
  kCompatibility = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ExitCode::kConfig, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ExitCode::kIo, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ExitCode::kNumeric, w) {}
};
struct CompatibilityError : Error {
  explicit CompatibilityError(const std::string& w) : Error(ExitCode::kCompatibility, w) {}
};

/// Programming errors: mismatched extents passed to an op.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace mpseg
