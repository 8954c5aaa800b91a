#pragma once

#include <string>
#include <vector>

#include "bread/feedback.hpp"
#include "bread/prompt.hpp"

namespace bread {

struct UpdateConfig {
  int width = 3;
  double temperature = 1.0;
  int max_output_tokens = 1024;
  int examples_char_budget = 4000;

  void validate() const;
};

struct UpdateContext {
  Gateway& gateway;
  const TemplateSet& templates;
  UpdateConfig config;
};

/// Candidate children from one update request. no_progress is set when every
/// parseable candidate equalled the parent even after one resample; in that
/// case children holds the single parent-identical prompt.
struct UpdateResult {
  std::vector<Prompt> children;
  bool no_progress = false;
};

/// One update call with sample_count = width; candidates are parsed from the
/// last <prompt>...</prompt> span of each sample and deduplicated by content
/// hash. A fully unparseable response is retried once, then UpdateParseError.
UpdateResult expand(UpdateContext& ctx, const Prompt& current,
                    const std::vector<PredictionRecord>& records,
                    const FeedbackBundle& bundle, int width, int iteration);

/// expand with width 1.
UpdateResult propose_prompt(UpdateContext& ctx, const Prompt& current,
                            const std::vector<PredictionRecord>& records,
                            const FeedbackBundle& bundle, int iteration);

}  // namespace bread
