#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "bread/chat.hpp"

namespace bread {

enum class BackendKind { http_openai_compatible, replay_fixture, synthetic_world };

const char* to_string(BackendKind kind);
BackendKind backend_kind_from_string(const std::string& s);

struct RetryPolicy {
  int max_attempts = 5;
  double base_backoff_seconds = 1.0;
  bool jitter = true;
};

struct BackendDescriptor {
  BackendKind kind = BackendKind::synthetic_world;
  std::string endpoint;      // http: base url, e.g. https://api.example.com/v1
  std::string model;         // http: model name sent on the wire
  std::string auth_env = "BREAD_API_KEY";  // env var holding the key, never the key itself
  std::string fixture_path;  // replay: JSONL transcript
  std::string world_file;    // synthetic: world definition JSON
  RetryPolicy retry;
  int max_in_flight = 4;

  void validate() const;

  /// Stable identity used by the evaluation cache; hashes the fields that
  /// change what the backend would answer.
  std::string id() const;

  nlohmann::json to_json() const;
  static BackendDescriptor from_json(const nlohmann::json& j);
};

/// A chat-completion producer. Implementations must return exactly
/// request.sample_count samples or throw.
class Backend {
public:
  virtual ~Backend() = default;
  virtual CompletionResponse generate(const CompletionRequest& request) = 0;

  /// Number of samples this backend has actually produced. Ledger
  /// conservation is checked against this on deterministic backends.
  virtual int64_t samples_generated() const { return samples_generated_; }

protected:
  int64_t samples_generated_ = 0;
};

}  // namespace bread
