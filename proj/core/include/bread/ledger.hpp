#pragma once

#include <array>
#include <cstdint>
#include <mutex>

#include <nlohmann/json.hpp>

#include "bread/chat.hpp"

namespace bread {

struct RoleCounters {
  int64_t requests = 0;
  int64_t samples = 0;
  int64_t prompt_tokens = 0;
  int64_t completion_tokens = 0;
};

/// Exact per-role accounting of backend sample generations. One ledger
/// "sample" is one generated completion: an n-sample request counts n.
/// Counters only ever increase within a run.
class CallLedger {
public:
  static constexpr size_t kRoleCount = 5;

  CallLedger() = default;
  CallLedger(const CallLedger& other) { *this = other; }
  CallLedger& operator=(const CallLedger& other);

  void record(RoleTag tag, int64_t samples, const TokenUsage& usage);

  /// Point-in-time copy; later gateway activity does not mutate it.
  CallLedger snapshot() const;

  const RoleCounters& role(RoleTag tag) const {
    return counters_[static_cast<size_t>(tag)];
  }
  int64_t total_samples() const;
  int64_t total_requests() const;

  /// Per-role difference (this - earlier). Both must come from the same run.
  CallLedger delta_since(const CallLedger& earlier) const;

  nlohmann::json to_json() const;
  static CallLedger from_json(const nlohmann::json& j);

private:
  std::array<RoleCounters, kRoleCount> counters_{};
  mutable std::mutex mutex_;
};

}  // namespace bread
