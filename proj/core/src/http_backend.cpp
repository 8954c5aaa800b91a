#include "bread/http_backend.hpp"

#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "bread/errors.hpp"

namespace bread {

namespace {

const char* role_name(MessageRole role) {
  switch (role) {
    case MessageRole::system: return "system";
    case MessageRole::user: return "user";
    case MessageRole::assistant: return "assistant";
  }
  return "user";
}

}  // namespace

HttpBackend::HttpBackend(BackendDescriptor desc) : desc_(std::move(desc)) {
  desc_.validate();
  const std::string& url = desc_.endpoint;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw Error(ErrorKind::config, "endpoint must include scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    base_url_ = url;
  } else {
    base_url_ = url.substr(0, path_start);
    path_prefix_ = url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/')
      path_prefix_.pop_back();
  }
}

CompletionResponse HttpBackend::generate(const CompletionRequest& request) {
  const char* key = std::getenv(desc_.auth_env.c_str());
  if (!key || !*key)
    throw Error(ErrorKind::config,
                "api key environment variable is unset: " + desc_.auth_env);

  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages)
    messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});

  nlohmann::json body{
      {"model", request.model.empty() ? desc_.model : request.model},
      {"messages", std::move(messages)},
      {"temperature", request.temperature},
      {"n", request.sample_count},
      {"max_tokens", request.max_output_tokens},
  };

  httplib::Client client(base_url_);
  client.set_connection_timeout(15, 0);
  client.set_read_timeout(120, 0);
  httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};

  auto result = client.Post(path_prefix_ + "/chat/completions", headers,
                            body.dump(), "application/json");
  if (!result)
    throw Error(ErrorKind::network,
                "connection failed: " + httplib::to_string(result.error()));
  if (result->status == 429)
    throw Error(ErrorKind::rate_limited, "rate limited (429)");
  if (result->status >= 500)
    throw Error(ErrorKind::network,
                "server error " + std::to_string(result->status));
  if (result->status != 200)
    throw Error(ErrorKind::api, "http " + std::to_string(result->status) +
                                    ": " + result->body);

  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(result->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::malformed_response,
                std::string("response is not json: ") + e.what());
  }

  CompletionResponse resp;
  try {
    for (const auto& choice : parsed.at("choices")) {
      resp.samples.push_back(choice.at("message").at("content").get<std::string>());
      resp.finish_reasons.push_back(choice.value("finish_reason", "stop"));
    }
    if (parsed.contains("usage")) {
      resp.usage.prompt_tokens = parsed["usage"].value("prompt_tokens", 0LL);
      resp.usage.completion_tokens = parsed["usage"].value("completion_tokens", 0LL);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::malformed_response,
                std::string("unexpected response shape: ") + e.what());
  }
  if (resp.samples.empty())
    throw Error(ErrorKind::malformed_response, "response contained no choices");

  samples_generated_ += static_cast<int64_t>(resp.samples.size());
  return resp;
}

}  // namespace bread
