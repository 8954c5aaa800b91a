#include "bread/ledger.hpp"

#include "bread/errors.hpp"

namespace bread {

namespace {
const char* kRoleNames[CallLedger::kRoleCount] = {
    "target_forward", "feedback", "summarize", "update", "evaluation"};
}

CallLedger& CallLedger::operator=(const CallLedger& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  counters_ = other.counters_;
  return *this;
}

void CallLedger::record(RoleTag tag, int64_t samples, const TokenUsage& usage) {
  std::lock_guard lock(mutex_);
  auto& c = counters_[static_cast<size_t>(tag)];
  c.requests += 1;
  c.samples += samples;
  c.prompt_tokens += usage.prompt_tokens;
  c.completion_tokens += usage.completion_tokens;
}

CallLedger CallLedger::snapshot() const { return *this; }

int64_t CallLedger::total_samples() const {
  std::lock_guard lock(mutex_);
  int64_t total = 0;
  for (const auto& c : counters_) total += c.samples;
  return total;
}

int64_t CallLedger::total_requests() const {
  std::lock_guard lock(mutex_);
  int64_t total = 0;
  for (const auto& c : counters_) total += c.requests;
  return total;
}

CallLedger CallLedger::delta_since(const CallLedger& earlier) const {
  CallLedger out = snapshot();
  CallLedger before = earlier.snapshot();
  for (size_t i = 0; i < kRoleCount; ++i) {
    out.counters_[i].requests -= before.counters_[i].requests;
    out.counters_[i].samples -= before.counters_[i].samples;
    out.counters_[i].prompt_tokens -= before.counters_[i].prompt_tokens;
    out.counters_[i].completion_tokens -= before.counters_[i].completion_tokens;
  }
  return out;
}

nlohmann::json CallLedger::to_json() const {
  CallLedger copy = snapshot();
  nlohmann::json roles;
  for (size_t i = 0; i < kRoleCount; ++i) {
    const auto& c = copy.counters_[i];
    roles[kRoleNames[i]] = {{"requests", c.requests},
                            {"samples", c.samples},
                            {"prompt_tokens", c.prompt_tokens},
                            {"completion_tokens", c.completion_tokens}};
  }
  return {{"roles", roles},
          {"total_samples", copy.total_samples()},
          {"total_requests", copy.total_requests()}};
}

CallLedger CallLedger::from_json(const nlohmann::json& j) {
  CallLedger out;
  const auto& roles = j.at("roles");
  for (size_t i = 0; i < kRoleCount; ++i) {
    if (!roles.contains(kRoleNames[i])) continue;
    const auto& r = roles.at(kRoleNames[i]);
    auto& c = out.counters_[i];
    c.requests = r.at("requests").get<int64_t>();
    c.samples = r.at("samples").get<int64_t>();
    c.prompt_tokens = r.at("prompt_tokens").get<int64_t>();
    c.completion_tokens = r.at("completion_tokens").get<int64_t>();
  }
  return out;
}

}  // namespace bread
