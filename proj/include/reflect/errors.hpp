// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace reflect {

// Invalid or inconsistent input data: malformed corpus files, violated
// corpus invariants, degenerate datasets. The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Grid search completed but no combination met the minimum-IR constraint.
// The CLI maps this to exit code 3.
class InfeasibleSearchError : public std::runtime_error {
 public:
  explicit InfeasibleSearchError(const std::string& what) : std::runtime_error(what) {}
};

// Pipeline stage failure; keeps the failing stage name so aborted runs can
// be diagnosed from the message alone. Partial artifacts stay on disk.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& cause)
      : std::runtime_error("stage " + stage + ": " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace reflect
