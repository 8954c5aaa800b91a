#pragma once

#include <string>

#include "bread/backend.hpp"

namespace bread {

/// OpenAI-compatible chat completions client. The API key is read from the
/// environment variable named in the descriptor at call time; it is never
/// persisted anywhere.
class HttpBackend : public Backend {
public:
  explicit HttpBackend(BackendDescriptor desc);

  CompletionResponse generate(const CompletionRequest& request) override;

private:
  BackendDescriptor desc_;
  std::string base_url_;     // scheme://host[:port]
  std::string path_prefix_;  // e.g. /v1
};

}  // namespace bread
