#pragma once

#include <stdexcept>
#include <string>

namespace branching {

enum class ErrorCode {
  InvalidArgument,
  Io,
  Parse,
  Validation,
  Unsupported,
  NotConverged,
  ConditioningUndefined,
  LimitExceeded,
  SnapshotUnavailable,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace branching
