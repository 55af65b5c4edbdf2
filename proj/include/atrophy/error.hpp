#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace atrophy {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An error raised inside a named pipeline stage ("extract", "skull",
/// "register", ...). The stage tag survives into batch failure reports.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace atrophy
