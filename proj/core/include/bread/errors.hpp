#pragma once

#include <stdexcept>
#include <string>

namespace bread {

enum class ErrorKind {
  network,
  rate_limited,
  fixture_miss,
  hash_collision,
  malformed_response,
  api,
  config,
  task,
  missing_expert_prompt,
  update_parse,
  prompt_too_long,
  empty_bundle,
  degenerate_differences,
  io,
  checkpoint,
};

/// All engine errors carry a kind so callers can branch without string matching.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Retryable errors are re-attempted by the gateway up to its retry budget.
  bool retryable() const noexcept {
    return kind_ == ErrorKind::network || kind_ == ErrorKind::rate_limited;
  }

private:
  ErrorKind kind_;
};

struct FixtureMissError : Error {
  explicit FixtureMissError(std::string msg)
      : Error(ErrorKind::fixture_miss, std::move(msg)) {}
};

struct EmptyBundleError : Error {
  explicit EmptyBundleError(std::string msg)
      : Error(ErrorKind::empty_bundle, std::move(msg)) {}
};

struct DegenerateDifferencesError : Error {
  explicit DegenerateDifferencesError(std::string msg)
      : Error(ErrorKind::degenerate_differences, std::move(msg)) {}
};

struct UpdateParseError : Error {
  explicit UpdateParseError(std::string msg)
      : Error(ErrorKind::update_parse, std::move(msg)) {}
};

}  // namespace bread
