#pragma once

#include <fstream>
#include <memory>
#include <string>
#include <unordered_map>

#include "bread/backend.hpp"

namespace bread {

/// One recorded exchange. The full canonical request is stored next to its
/// hash so replay can detect hash collisions instead of serving wrong data.
struct FixtureEntry {
  std::string request_hash;
  std::string request_canonical;
  std::vector<std::string> samples;
  std::vector<std::string> finish_reasons;
  TokenUsage usage;
};

/// Newline-delimited JSON transcript of (request -> response) pairs.
class FixtureStore {
public:
  static FixtureStore load(const std::string& path);

  const FixtureEntry* find(const std::string& hash) const;
  size_t size() const { return entries_.size(); }

private:
  std::unordered_map<std::string, FixtureEntry> entries_;
};

/// Serves recorded responses only. A request whose key is absent fails with
/// FixtureMiss; it never falls through to a live backend.
class ReplayBackend : public Backend {
public:
  explicit ReplayBackend(FixtureStore store) : store_(std::move(store)) {}

  CompletionResponse generate(const CompletionRequest& request) override;

private:
  FixtureStore store_;
};

/// Wraps another backend and appends every successful exchange to a fixture
/// file, one JSON record per line.
class RecordingBackend : public Backend {
public:
  RecordingBackend(std::unique_ptr<Backend> inner, const std::string& path);

  CompletionResponse generate(const CompletionRequest& request) override;
  int64_t samples_generated() const override { return inner_->samples_generated(); }

private:
  std::unique_ptr<Backend> inner_;
  std::ofstream out_;
};

}  // namespace bread
