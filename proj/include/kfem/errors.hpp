#pragma once

#include <stdexcept>
#include <string>

namespace kfem {

/// Structural / input validation failure (bad geometry, malformed JSON,
/// out-of-range parameters). Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
public:
  ValidationError(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

private:
  std::string code_;  // short machine-readable tag, e.g. "open-chain"
};

/// Mathematical failure detected at run time (positivity violation,
/// divergent weighted integral, weight outside the admissible range,
/// solver breakdown). Maps to CLI exit code 3.
class MathError : public std::runtime_error {
public:
  MathError(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

private:
  std::string code_;
};

}  // namespace kfem
