#pragma once

#include <stdexcept>
#include <string>

namespace koopgen {

enum class ErrorKind {
  kInvalidInput,
  kUnsupported,
  kDivergence,
  kDegenerateData,
  kInsufficientRank,
  kNotPositiveDefinite,
  kDegenerateMode,
  kValidation,
  kDependency,
  kIo,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit code for an error surfaced by the command line tool:
// 2 validation, 3 numerical failure, 4 missing dependency, 1 otherwise.
int exit_code(ErrorKind kind);

}  // namespace koopgen
