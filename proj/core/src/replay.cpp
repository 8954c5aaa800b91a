#include "bread/replay.hpp"

#include "bread/errors.hpp"
#include "bread/hash.hpp"

namespace bread {

FixtureStore FixtureStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open fixture file: " + path);
  FixtureStore store;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::io, "fixture " + path + " line " +
                                     std::to_string(line_no) + ": " + e.what());
    }
    FixtureEntry entry;
    entry.request_hash = j.at("request_hash").get<std::string>();
    entry.request_canonical = j.at("request").dump();
    entry.samples = j.at("samples").get<std::vector<std::string>>();
    if (j.contains("finish_reasons"))
      entry.finish_reasons = j.at("finish_reasons").get<std::vector<std::string>>();
    if (j.contains("usage")) {
      entry.usage.prompt_tokens = j.at("usage").at("prompt_tokens").get<int64_t>();
      entry.usage.completion_tokens =
          j.at("usage").at("completion_tokens").get<int64_t>();
    }
    // Re-recordings of an identical request overwrite; the payload is the same.
    store.entries_[entry.request_hash] = std::move(entry);
  }
  return store;
}

const FixtureEntry* FixtureStore::find(const std::string& hash) const {
  auto it = entries_.find(hash);
  return it == entries_.end() ? nullptr : &it->second;
}

CompletionResponse ReplayBackend::generate(const CompletionRequest& request) {
  const std::string canonical = canonical_request_string(request);
  const std::string hash = digest(canonical);
  const FixtureEntry* entry = store_.find(hash);
  if (entry == nullptr)
    throw FixtureMissError("replay fixture has no entry for request hash " + hash);
  if (entry->request_canonical != canonical)
    throw Error(ErrorKind::hash_collision,
                "fixture hash " + hash + " maps to a different request");
  if (static_cast<int>(entry->samples.size()) != request.sample_count)
    throw Error(ErrorKind::malformed_response,
                "fixture entry sample count mismatch for hash " + hash);
  samples_generated_ += static_cast<int64_t>(entry->samples.size());
  CompletionResponse resp;
  resp.samples = entry->samples;
  resp.finish_reasons = entry->finish_reasons.empty()
                            ? std::vector<std::string>(entry->samples.size(), "stop")
                            : entry->finish_reasons;
  resp.usage = entry->usage;
  return resp;
}

RecordingBackend::RecordingBackend(std::unique_ptr<Backend> inner,
                                   const std::string& path)
    : inner_(std::move(inner)), out_(path, std::ios::app) {
  if (!out_) throw Error(ErrorKind::io, "cannot open fixture file for append: " + path);
}

CompletionResponse RecordingBackend::generate(const CompletionRequest& request) {
  CompletionResponse resp = inner_->generate(request);
  nlohmann::json record{
      {"request_hash", request_hash(request)},
      {"request", canonical_request_json(request)},
      {"samples", resp.samples},
      {"finish_reasons", resp.finish_reasons},
      {"usage",
       {{"prompt_tokens", resp.usage.prompt_tokens},
        {"completion_tokens", resp.usage.completion_tokens}}},
  };
  out_ << record.dump() << "\n";
  out_.flush();
  return resp;
}

}  // namespace bread
