#include "bread/chat.hpp"

#include "bread/errors.hpp"
#include "bread/hash.hpp"

namespace bread {

const char* to_string(MessageRole role) {
  switch (role) {
    case MessageRole::system: return "system";
    case MessageRole::user: return "user";
    case MessageRole::assistant: return "assistant";
  }
  return "user";
}

const char* to_string(RoleTag tag) {
  switch (tag) {
    case RoleTag::target_forward: return "target_forward";
    case RoleTag::feedback: return "feedback";
    case RoleTag::summarize: return "summarize";
    case RoleTag::update: return "update";
    case RoleTag::evaluation: return "evaluation";
  }
  return "target_forward";
}

MessageRole message_role_from_string(const std::string& s) {
  if (s == "system") return MessageRole::system;
  if (s == "user") return MessageRole::user;
  if (s == "assistant") return MessageRole::assistant;
  throw Error(ErrorKind::config, "unknown message role: " + s);
}

RoleTag role_tag_from_string(const std::string& s) {
  if (s == "target_forward") return RoleTag::target_forward;
  if (s == "feedback") return RoleTag::feedback;
  if (s == "summarize") return RoleTag::summarize;
  if (s == "update") return RoleTag::update;
  if (s == "evaluation") return RoleTag::evaluation;
  throw Error(ErrorKind::config, "unknown role tag: " + s);
}

void CompletionRequest::validate() const {
  if (messages.empty())
    throw Error(ErrorKind::config, "completion request has no messages");
  for (const auto& m : messages)
    if (m.content.empty())
      throw Error(ErrorKind::config, "completion request has an empty message");
  if (sample_count < 1)
    throw Error(ErrorKind::config, "sample_count must be >= 1");
  if (max_output_tokens < 1)
    throw Error(ErrorKind::config, "max_output_tokens must be >= 1");
  if (temperature < 0.0)
    throw Error(ErrorKind::config, "temperature must be >= 0");
}

nlohmann::json canonical_request_json(const CompletionRequest& req) {
  // nlohmann::json objects are backed by std::map, so dump() emits sorted
  // keys regardless of insertion order.
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : req.messages)
    msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return nlohmann::json{
      {"messages", std::move(msgs)},
      {"temperature", req.temperature},
      {"max_output_tokens", req.max_output_tokens},
      {"sample_count", req.sample_count},
      {"role_tag", to_string(req.role_tag)},
      {"model", req.model},
  };
}

std::string canonical_request_string(const CompletionRequest& req) {
  return canonical_request_json(req).dump();
}

std::string request_hash(const CompletionRequest& req) {
  return digest(canonical_request_string(req));
}

CompletionRequest request_from_json(const nlohmann::json& j) {
  CompletionRequest req;
  for (const auto& m : j.at("messages")) {
    req.messages.push_back({message_role_from_string(m.at("role").get<std::string>()),
                            m.at("content").get<std::string>()});
  }
  req.temperature = j.at("temperature").get<double>();
  req.max_output_tokens = j.at("max_output_tokens").get<int>();
  req.sample_count = j.at("sample_count").get<int>();
  req.role_tag = role_tag_from_string(j.at("role_tag").get<std::string>());
  req.model = j.at("model").get<std::string>();
  return req;
}

}  // namespace bread
