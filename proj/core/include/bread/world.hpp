#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bread/backend.hpp"
#include "bread/task.hpp"

namespace bread {

struct WorldExample {
  std::string id;
  std::string input_text;
  std::string gold;
  std::vector<std::string> required;
  std::vector<std::string> forbidden;
};

/// Rule-based stand-in for every model role. An example is answered correctly
/// iff the prompt contains all its required tokens and none of its forbidden
/// ones; feedback, summarization, and updates are token-level edits. All
/// randomness derives from (world seed, request content, sample index), so a
/// given request always gets the same response.
struct TokenWorld {
  std::string name = "world";
  std::vector<std::string> vocabulary;
  std::vector<std::string> labels;
  double noise = 0.0;
  double drop_rate = 0.0;
  uint64_t seed = 0;
  std::string default_prompt;
  std::string expert_prompt;
  std::vector<WorldExample> examples;
  std::map<std::string, std::vector<std::string>> splits;  // split -> example ids

  static TokenWorld load(const std::string& path);
  static TokenWorld from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void save(const std::string& path) const;
  void validate() const;
  std::string content_id() const;

  TaskSpec to_task_spec() const;
  const WorldExample& example_by_id(const std::string& id) const;
  const WorldExample* example_by_input(const std::string& input) const;

  /// Vocabulary tokens present in the text (whitespace split, unknown words
  /// ignored), deduplicated and sorted.
  std::vector<std::string> prompt_tokens(const std::string& prompt_text) const;
  bool satisfies(const std::string& prompt_text, const WorldExample& ex) const;

  /// Brute-force split accuracy, the oracle tests compare engine results to.
  double split_accuracy(const std::string& prompt_text,
                        const std::string& split_name) const;
};

/// The world's answer to one example under a prompt: the gold label when the
/// token conditions hold, else the next label cyclically.
std::string world_answer(const TokenWorld& world, const std::string& prompt_text,
                         const WorldExample& ex);

/// Directive lines for the listed examples: "ADD x"/"REMOVE y" for wrong ones,
/// "KEEP z" for correct ones. Deterministic part only; noise is injected per
/// sample by the backend.
std::vector<std::string> world_feedback_directives(
    const TokenWorld& world, const std::string& prompt_text,
    const std::vector<std::pair<std::string, bool>>& example_correctness);

/// Majority filter over k review texts (strictly more than k/2).
std::string world_summarize(const std::vector<std::string>& reviews);

/// Applies ADD/REMOVE directives, then drops each surviving pre-existing
/// token not covered by a KEEP with probability drop_rate.
std::string world_update(const TokenWorld& world, const std::string& prompt_text,
                         const std::vector<std::string>& directive_lines, Rng& rng);

class WorldBackend : public Backend {
public:
  explicit WorldBackend(TokenWorld world);

  CompletionResponse generate(const CompletionRequest& request) override;

  const TokenWorld& world() const { return world_; }

private:
  TokenWorld world_;
  std::map<std::string, size_t> by_input_;
};

/// 12 tokens, 40 prefix-structured examples (20/10/10), zero noise and drop:
/// the clean convergence benchmark.
TokenWorld make_convergence_world(uint64_t seed = 7);

/// 8 critical + 8 new + 8 decoy tokens, one required token per example, the
/// expert prompt holding exactly the criticals; noisy and lossy so unprotected
/// optimization degrades.
TokenWorld make_migration_world(uint64_t seed = 11);

/// Heavy feedback noise (0.5), no drop: isolates diversification effects.
TokenWorld make_noisy_world(uint64_t seed = 13);

}  // namespace bread
