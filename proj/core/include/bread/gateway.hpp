#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "bread/backend.hpp"
#include "bread/ledger.hpp"

namespace bread {

class TokenWorld;

/// Routes requests to backends, retries transient failures with exponential
/// backoff and full jitter, and keeps the call ledger. Requests tagged
/// target_forward / evaluation go to the target backend; feedback / summarize
/// / update go to the optimizer backend (the target one when not configured).
class Gateway {
public:
  explicit Gateway(std::unique_ptr<Backend> target,
                   BackendDescriptor target_desc,
                   std::unique_ptr<Backend> optimizer = nullptr,
                   std::optional<BackendDescriptor> optimizer_desc = std::nullopt);

  CompletionResponse complete(const CompletionRequest& request);

  CallLedger ledger_snapshot() const { return ledger_.snapshot(); }
  void restore_ledger(const CallLedger& ledger) { ledger_ = ledger; }

  const BackendDescriptor& target_descriptor() const { return target_desc_; }
  std::string backend_id() const { return target_desc_.id(); }

  /// Total samples the underlying backends produced; used to verify ledger
  /// conservation on deterministic backends.
  int64_t backend_samples_generated() const;

  /// Sleep hook, overridable so tests do not wait on backoff.
  std::function<void(double /*seconds*/)> sleep_fn;

private:
  Backend& route(RoleTag tag);

  std::unique_ptr<Backend> target_;
  std::unique_ptr<Backend> optimizer_;
  BackendDescriptor target_desc_;
  std::optional<BackendDescriptor> optimizer_desc_;
  CallLedger ledger_;
};

/// Builds the backend stack described by the descriptors (plus optional
/// recording wrapper) and wires it into a gateway.
std::unique_ptr<Gateway> make_gateway(const BackendDescriptor& target,
                                      const std::optional<BackendDescriptor>& optimizer,
                                      const std::string& record_fixture_path = "");

/// Gateway over an in-memory synthetic world (test and simulation entry
/// point; both roles served by the same world).
std::unique_ptr<Gateway> make_world_gateway(const TokenWorld& world,
                                            const std::string& record_fixture_path = "");

}  // namespace bread
