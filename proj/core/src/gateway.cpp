#include "bread/gateway.hpp"

#include <chrono>
#include <random>
#include <thread>

#include "bread/errors.hpp"
#include "bread/hash.hpp"
#include "bread/http_backend.hpp"
#include "bread/replay.hpp"
#include "bread/world.hpp"

namespace bread {

const char* to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::http_openai_compatible: return "http_openai_compatible";
    case BackendKind::replay_fixture: return "replay_fixture";
    case BackendKind::synthetic_world: return "synthetic_world";
  }
  return "synthetic_world";
}

BackendKind backend_kind_from_string(const std::string& s) {
  if (s == "http_openai_compatible" || s == "http") return BackendKind::http_openai_compatible;
  if (s == "replay_fixture" || s == "replay") return BackendKind::replay_fixture;
  if (s == "synthetic_world" || s == "world") return BackendKind::synthetic_world;
  throw Error(ErrorKind::config, "unknown backend kind: " + s);
}

void BackendDescriptor::validate() const {
  switch (kind) {
    case BackendKind::http_openai_compatible:
      if (endpoint.empty() || model.empty() || auth_env.empty())
        throw Error(ErrorKind::config,
                    "http backend requires endpoint, model and auth env var");
      break;
    case BackendKind::replay_fixture:
      if (fixture_path.empty())
        throw Error(ErrorKind::config, "replay backend requires a fixture path");
      break;
    case BackendKind::synthetic_world:
      if (world_file.empty())
        throw Error(ErrorKind::config, "synthetic backend requires a world file");
      break;
  }
  if (retry.max_attempts < 1)
    throw Error(ErrorKind::config, "retry max_attempts must be >= 1");
  if (max_in_flight < 1)
    throw Error(ErrorKind::config, "max_in_flight must be >= 1");
}

std::string BackendDescriptor::id() const {
  nlohmann::json j{{"kind", to_string(kind)},
                   {"endpoint", endpoint},
                   {"model", model},
                   {"fixture", fixture_path},
                   {"world", world_file}};
  return digest(j.dump());
}

nlohmann::json BackendDescriptor::to_json() const {
  return {{"kind", to_string(kind)},
          {"endpoint", endpoint},
          {"model", model},
          {"auth_env", auth_env},
          {"fixture_path", fixture_path},
          {"world_file", world_file},
          {"retry",
           {{"max_attempts", retry.max_attempts},
            {"base_backoff_seconds", retry.base_backoff_seconds},
            {"jitter", retry.jitter}}},
          {"max_in_flight", max_in_flight}};
}

BackendDescriptor BackendDescriptor::from_json(const nlohmann::json& j) {
  BackendDescriptor d;
  d.kind = backend_kind_from_string(j.at("kind").get<std::string>());
  d.endpoint = j.value("endpoint", "");
  d.model = j.value("model", "");
  d.auth_env = j.value("auth_env", "BREAD_API_KEY");
  d.fixture_path = j.value("fixture_path", "");
  d.world_file = j.value("world_file", "");
  if (j.contains("retry")) {
    const auto& r = j.at("retry");
    d.retry.max_attempts = r.value("max_attempts", 5);
    d.retry.base_backoff_seconds = r.value("base_backoff_seconds", 1.0);
    d.retry.jitter = r.value("jitter", true);
  }
  d.max_in_flight = j.value("max_in_flight", 4);
  return d;
}

Gateway::Gateway(std::unique_ptr<Backend> target, BackendDescriptor target_desc,
                 std::unique_ptr<Backend> optimizer,
                 std::optional<BackendDescriptor> optimizer_desc)
    : target_(std::move(target)),
      optimizer_(std::move(optimizer)),
      target_desc_(std::move(target_desc)),
      optimizer_desc_(std::move(optimizer_desc)) {
  sleep_fn = [](double seconds) {
    std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
  };
}

Backend& Gateway::route(RoleTag tag) {
  const bool target_role = tag == RoleTag::target_forward || tag == RoleTag::evaluation;
  if (!target_role && optimizer_) return *optimizer_;
  return *target_;
}

CompletionResponse Gateway::complete(const CompletionRequest& request) {
  request.validate();
  Backend& backend = route(request.role_tag);
  const RetryPolicy& policy =
      (&backend == optimizer_.get() && optimizer_desc_) ? optimizer_desc_->retry
                                                        : target_desc_.retry;

  // Backoff jitter draws from a local generator; it never touches run
  // randomness, so retries cannot perturb otherwise deterministic runs.
  static thread_local std::mt19937_64 jitter_rng{std::random_device{}()};

  for (int attempt = 1;; ++attempt) {
    try {
      CompletionResponse resp = backend.generate(request);
      if (static_cast<int>(resp.samples.size()) != request.sample_count)
        throw Error(ErrorKind::malformed_response,
                    "backend returned " + std::to_string(resp.samples.size()) +
                        " samples, expected " + std::to_string(request.sample_count));
      // One ledger update per successful request, regardless of attempts.
      ledger_.record(request.role_tag, request.sample_count, resp.usage);
      return resp;
    } catch (const Error& e) {
      if (!e.retryable() || attempt >= policy.max_attempts) throw;
      double backoff = policy.base_backoff_seconds *
                       static_cast<double>(1LL << (attempt - 1));
      if (policy.jitter) {
        std::uniform_real_distribution<double> dist(0.0, backoff);
        backoff = dist(jitter_rng);
      }
      sleep_fn(backoff);
    }
  }
}

int64_t Gateway::backend_samples_generated() const {
  int64_t total = target_->samples_generated();
  if (optimizer_) total += optimizer_->samples_generated();
  return total;
}

namespace {

std::unique_ptr<Backend> build_backend(const BackendDescriptor& desc) {
  desc.validate();
  switch (desc.kind) {
    case BackendKind::http_openai_compatible:
      return std::make_unique<HttpBackend>(desc);
    case BackendKind::replay_fixture:
      return std::make_unique<ReplayBackend>(FixtureStore::load(desc.fixture_path));
    case BackendKind::synthetic_world:
      return std::make_unique<WorldBackend>(TokenWorld::load(desc.world_file));
  }
  throw Error(ErrorKind::config, "unreachable backend kind");
}

}  // namespace

std::unique_ptr<Gateway> make_gateway(const BackendDescriptor& target,
                                      const std::optional<BackendDescriptor>& optimizer,
                                      const std::string& record_fixture_path) {
  std::unique_ptr<Backend> target_backend = build_backend(target);
  std::unique_ptr<Backend> optimizer_backend;
  if (optimizer) optimizer_backend = build_backend(*optimizer);
  if (!record_fixture_path.empty()) {
    // With two distinct backends both streams land in one transcript; entries
    // are keyed by request hash, so replay does not depend on file order.
    target_backend = std::make_unique<RecordingBackend>(std::move(target_backend),
                                                        record_fixture_path);
    if (optimizer_backend)
      optimizer_backend = std::make_unique<RecordingBackend>(
          std::move(optimizer_backend), record_fixture_path);
  }
  return std::make_unique<Gateway>(std::move(target_backend), target,
                                   std::move(optimizer_backend), optimizer);
}

std::unique_ptr<Gateway> make_world_gateway(const TokenWorld& world,
                                            const std::string& record_fixture_path) {
  BackendDescriptor desc;
  desc.kind = BackendKind::synthetic_world;
  desc.world_file = "mem:" + world.content_id();
  std::unique_ptr<Backend> backend = std::make_unique<WorldBackend>(world);
  if (!record_fixture_path.empty())
    backend = std::make_unique<RecordingBackend>(std::move(backend),
                                                 record_fixture_path);
  return std::make_unique<Gateway>(std::move(backend), desc);
}

}  // namespace bread
