#include "bread/update.hpp"

#include <algorithm>
#include <set>

#include "bread/errors.hpp"

namespace bread {

void UpdateConfig::validate() const {
  if (width < 1) throw Error(ErrorKind::config, "expansion width must be >= 1");
  if (examples_char_budget < 1)
    throw Error(ErrorKind::config, "examples_char_budget must be >= 1");
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

/// Content of the last <prompt>...</prompt> span, or empty when unparseable.
std::string parse_prompt_span(const std::string& raw) {
  static const std::string open = "<prompt>";
  static const std::string close = "</prompt>";
  size_t pos = raw.rfind(open);
  if (pos == std::string::npos) return "";
  size_t start = pos + open.size();
  size_t stop = raw.find(close, start);
  if (stop == std::string::npos) return "";
  return trim(raw.substr(start, stop - start));
}

std::string build_request_body(UpdateContext& ctx, const Prompt& current,
                               const std::vector<PredictionRecord>& records,
                               const FeedbackBundle& bundle) {
  auto [correct, incorrect] = partition_records(records);
  const auto& quoted = incorrect.empty() ? records : incorrect;

  std::string positive_block;
  if (bundle.positive) {
    positive_block =
        "<positive_feedback>\nThe elements below caused correct answers. "
        "Preserve them verbatim.\n" +
        bundle.positive->text + "\n</positive_feedback>";
  }
  return render_template(
      ctx.templates.update_prompt,
      {{"current_prompt", current.text},
       {"examples_block",
        format_examples_block(quoted, ctx.config.examples_char_budget)},
       {"negative_feedback",
        bundle.negative ? bundle.negative->text : std::string("NO CHANGES")},
       {"positive_block", positive_block}});
}

std::vector<std::string> request_candidates(UpdateContext& ctx,
                                            const std::string& body, int width,
                                            bool alternative) {
  CompletionRequest req;
  req.messages = {{MessageRole::user, body}};
  if (alternative)
    req.messages.push_back(
        {MessageRole::user,
         "Propose a different revision than you would have otherwise."});
  req.temperature = ctx.config.temperature;
  req.max_output_tokens = ctx.config.max_output_tokens;
  req.sample_count = width;
  req.role_tag = RoleTag::update;

  CompletionResponse resp = ctx.gateway.complete(req);
  std::vector<std::string> texts;
  for (const auto& raw : resp.samples) {
    std::string text = parse_prompt_span(raw);
    if (text.empty()) continue;
    if (text.size() > kMaxPromptChars)
      throw Error(ErrorKind::prompt_too_long,
                  "update produced a prompt of " + std::to_string(text.size()) +
                      " chars, limit is " + std::to_string(kMaxPromptChars));
    texts.push_back(std::move(text));
  }
  return texts;
}

}  // namespace

UpdateResult expand(UpdateContext& ctx, const Prompt& current,
                    const std::vector<PredictionRecord>& records,
                    const FeedbackBundle& bundle, int width, int iteration) {
  ctx.config.validate();
  if (width < 1) throw Error(ErrorKind::config, "expand width must be >= 1");
  if (!bundle.negative && !bundle.positive)
    throw Error(ErrorKind::config, "expand called with an empty bundle");

  const std::string body = build_request_body(ctx, current, records, bundle);

  auto distinct_children = [&](const std::vector<std::string>& texts) {
    std::vector<Prompt> children;
    std::set<std::string> seen{current.id};
    for (const auto& text : texts) {
      Prompt child = make_child_prompt(current, text, iteration);
      if (seen.insert(child.id).second) children.push_back(std::move(child));
    }
    return children;
  };

  auto texts = request_candidates(ctx, body, width, false);
  bool saw_parseable = !texts.empty();
  auto children = distinct_children(texts);
  if (!children.empty()) return {std::move(children), false};

  // Either nothing parsed or every candidate equalled the parent; one retry
  // with altered content keeps replay keys distinct.
  texts = request_candidates(ctx, body, width, true);
  saw_parseable = saw_parseable || !texts.empty();
  children = distinct_children(texts);
  if (!children.empty()) return {std::move(children), false};

  if (!saw_parseable)
    throw UpdateParseError("update output had no <prompt> span after one retry");

  UpdateResult result;
  result.children.push_back(make_child_prompt(current, current.text, iteration));
  result.no_progress = true;
  return result;
}

UpdateResult propose_prompt(UpdateContext& ctx, const Prompt& current,
                            const std::vector<PredictionRecord>& records,
                            const FeedbackBundle& bundle, int iteration) {
  return expand(ctx, current, records, bundle, 1, iteration);
}

}  // namespace bread
