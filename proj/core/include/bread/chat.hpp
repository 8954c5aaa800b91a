#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace bread {

enum class MessageRole { system, user, assistant };

/// Attribution of a request to one of the engine's call categories. Every
/// request carries one; the ledger is partitioned by it.
enum class RoleTag { target_forward, feedback, summarize, update, evaluation };

const char* to_string(MessageRole role);
const char* to_string(RoleTag tag);
MessageRole message_role_from_string(const std::string& s);
RoleTag role_tag_from_string(const std::string& s);

struct ChatMessage {
  MessageRole role = MessageRole::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct CompletionRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_output_tokens = 512;
  int sample_count = 1;
  RoleTag role_tag = RoleTag::target_forward;
  std::string model;  // backend model name, part of the canonical key

  /// Throws Error(config) when an invariant is broken.
  void validate() const;
};

struct TokenUsage {
  int64_t prompt_tokens = 0;
  int64_t completion_tokens = 0;
};

struct CompletionResponse {
  std::vector<std::string> samples;
  std::vector<std::string> finish_reasons;
  TokenUsage usage;
};

/// Canonical serialization: sorted keys, no insignificant whitespace. This is
/// the replay fixture key, so it must be stable across platforms and
/// insensitive to field ordering in any intermediate representation.
nlohmann::json canonical_request_json(const CompletionRequest& req);
std::string canonical_request_string(const CompletionRequest& req);
std::string request_hash(const CompletionRequest& req);

CompletionRequest request_from_json(const nlohmann::json& j);

}  // namespace bread
