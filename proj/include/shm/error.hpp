#pragma once

#include <stdexcept>
#include <string>

namespace shm {

enum class ErrorKind {
  InvalidInput,
  Numerical,
  TrainingDiverged,
  InsufficientModes,
  MalformedFile,
  UnsupportedVersion,
};

/// Library-wide exception. The kind decides the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::InvalidInput, what);
}

/// 2 for bad input or data, 3 for numerical failure.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Numerical:
    case ErrorKind::TrainingDiverged:
      return 3;
    default:
      return 2;
  }
}

}  // namespace shm
