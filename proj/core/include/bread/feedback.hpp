#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bread/forward_eval.hpp"
#include "bread/gateway.hpp"
#include "bread/prompt.hpp"
#include "bread/templates.hpp"

namespace bread {

enum class Polarity { positive, negative };
enum class Aggregation { llm_summarize, majority_directives };

const char* to_string(Polarity p);
const char* to_string(Aggregation a);
Aggregation aggregation_from_string(const std::string& s);

/// Polarity-tagged advice text; when aggregate is set, the signal is the
/// consolidation of k diversified samples whose ids are recorded.
struct FeedbackSignal {
  Polarity polarity = Polarity::negative;
  std::string text;
  std::string prompt_id;
  std::string batch_id;
  int k = 1;
  bool aggregate = false;
  std::vector<std::string> sample_ids;

  nlohmann::json to_json() const;
};

struct FeedbackBundle {
  std::optional<FeedbackSignal> negative;
  std::optional<FeedbackSignal> positive;
  int depth = 0;

  nlohmann::json summary_json() const;
};

/// When positive reinforcement begins. With gate_on_iteration set the gate
/// compares against the global iteration counter instead of lineage depth.
struct ReinforcementSchedule {
  bool positive_enabled = true;
  int positive_start_depth = 3;
  bool gate_on_iteration = false;

  bool positive_active(int depth_or_iteration) const {
    return positive_enabled && depth_or_iteration >= positive_start_depth;
  }
};

struct DiversificationConfig {
  int k = 1;
  Aggregation aggregation = Aggregation::llm_summarize;
  double temperature = 1.0;
  int max_output_tokens = 512;
  int examples_char_budget = 4000;

  void validate() const;
};

struct FeedbackContext {
  Gateway& gateway;
  const TemplateSet& templates;
  DiversificationConfig diversification;
};

/// Builds the examples block quoted inside feedback and update requests:
/// one "[example id=... correct=...]" record per prediction, truncated once
/// the character budget is exceeded (at least one record always included).
std::string format_examples_block(const std::vector<PredictionRecord>& records,
                                  int char_budget);

/// Lines occurring in strictly more than half of the texts, deduplicated and
/// sorted. Blank lines and the "NO CHANGES" placeholder are ignored.
std::vector<std::string> strict_majority_lines(const std::vector<std::string>& texts);

FeedbackSignal generate_negative_feedback(FeedbackContext& ctx, const Prompt& prompt,
                                          const std::vector<PredictionRecord>& incorrect,
                                          const std::string& batch_id);

FeedbackSignal generate_positive_feedback(FeedbackContext& ctx, const Prompt& prompt,
                                          const std::vector<PredictionRecord>& correct,
                                          const std::string& batch_id);

/// Negative signal iff wrong records exist; positive signal iff the schedule
/// allows it at this depth and correct records exist. Throws EmptyBundleError
/// when neither applies.
FeedbackBundle compose_bundle(FeedbackContext& ctx, const Prompt& prompt,
                              const std::vector<PredictionRecord>& records,
                              int depth, const ReinforcementSchedule& schedule,
                              const std::string& batch_id);

}  // namespace bread
