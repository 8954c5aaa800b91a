#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bread/gateway.hpp"
#include "bread/prompt.hpp"
#include "bread/task.hpp"

namespace bread {

struct PredictionRecord {
  std::string example_id;
  std::string input_text;
  std::string gold_label;
  std::string raw_output;
  std::optional<std::string> extracted;  // nothing = unparseable
  bool correct = false;

  nlohmann::json to_json() const;
};

struct EvaluationReport {
  std::string prompt_id;
  std::string split;
  double accuracy = 0.0;
  int n = 0;
  std::vector<PredictionRecord> records;  // empty when served from a restored cache

  nlohmann::json summary_json() const;
};

struct GenParams {
  double forward_temperature = 0.0;
  int max_output_tokens = 512;
};

/// Scores one prediction. The engine ships exact match only; the interface
/// exists so an LLM-judged variant can plug in.
class Scorer {
public:
  virtual ~Scorer() = default;
  virtual bool correct(const PredictionRecord& record, const TaskSpec& task) const = 0;
};

class ExactMatchScorer : public Scorer {
public:
  bool correct(const PredictionRecord& record, const TaskSpec& task) const override;
};

/// One target_forward call per example, order-preserving. Gateway errors are
/// re-thrown annotated with the offending example id.
std::vector<PredictionRecord> forward_generate(const Prompt& prompt,
                                               const std::vector<Example>& batch,
                                               const TaskSpec& task, Gateway& gateway,
                                               const GenParams& params,
                                               RoleTag role_tag = RoleTag::target_forward);

std::pair<std::vector<PredictionRecord>, std::vector<PredictionRecord>>
partition_records(const std::vector<PredictionRecord>& records);

/// Split evaluation with a (prompt id, split, backend id) cache: re-evaluating
/// an unchanged prompt performs zero new calls.
class Evaluator {
public:
  Evaluator(const TaskSpec& task, Gateway& gateway, GenParams params = {});

  const EvaluationReport& evaluate(const Prompt& prompt, const std::string& split_name);

  /// Called once per fresh (non-cached) evaluation, for run-directory sinks.
  std::function<void(const EvaluationReport&)> on_fresh_report;

  nlohmann::json cache_to_json() const;
  void restore_cache(const nlohmann::json& j);
  size_t cache_size() const { return cache_.size(); }

private:
  const TaskSpec& task_;
  Gateway& gateway_;
  GenParams params_;
  std::map<std::string, EvaluationReport> cache_;
};

}  // namespace bread
