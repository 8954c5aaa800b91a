#include "bread/feedback.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "bread/errors.hpp"
#include "bread/hash.hpp"

namespace bread {

const char* to_string(Polarity p) {
  return p == Polarity::positive ? "positive" : "negative";
}

const char* to_string(Aggregation a) {
  return a == Aggregation::llm_summarize ? "llm_summarize" : "majority_directives";
}

Aggregation aggregation_from_string(const std::string& s) {
  if (s == "llm_summarize") return Aggregation::llm_summarize;
  if (s == "majority_directives") return Aggregation::majority_directives;
  throw Error(ErrorKind::config, "unknown aggregation: " + s);
}

void DiversificationConfig::validate() const {
  if (k < 1) throw Error(ErrorKind::config, "diversification k must be >= 1");
  if (examples_char_budget < 1)
    throw Error(ErrorKind::config, "examples_char_budget must be >= 1");
}

nlohmann::json FeedbackSignal::to_json() const {
  return {{"polarity", to_string(polarity)},
          {"text", text},
          {"prompt_id", prompt_id},
          {"batch_id", batch_id},
          {"k", k},
          {"aggregate", aggregate},
          {"sample_ids", sample_ids}};
}

nlohmann::json FeedbackBundle::summary_json() const {
  nlohmann::json j{{"depth", depth},
                   {"negative", negative.has_value()},
                   {"positive", positive.has_value()}};
  if (negative) {
    j["negative_id"] = digest(negative->text);
    j["k"] = negative->k;
  }
  if (positive) j["positive_id"] = digest(positive->text);
  return j;
}

std::string format_examples_block(const std::vector<PredictionRecord>& records,
                                  int char_budget) {
  std::ostringstream out;
  size_t written = 0;
  size_t included = 0;
  for (const auto& r : records) {
    std::ostringstream rec;
    rec << "[example id=" << r.example_id << " correct="
        << (r.correct ? "true" : "false") << "]\n"
        << "input: " << r.input_text << "\n"
        << "gold: " << r.gold_label << "\n"
        << "got: " << (r.extracted ? *r.extracted : std::string("<unparseable>"))
        << "\n";
    const std::string body = rec.str();
    if (included > 0 && written + body.size() > static_cast<size_t>(char_budget))
      break;
    out << body;
    written += body.size();
    ++included;
  }
  std::string s = out.str();
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

std::vector<std::string> strict_majority_lines(const std::vector<std::string>& texts) {
  std::map<std::string, size_t> counts;
  for (const auto& text : texts) {
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
        line.pop_back();
      size_t start = line.find_first_not_of(' ');
      if (start == std::string::npos) continue;
      line = line.substr(start);
      if (line.empty() || line == "NO CHANGES") continue;
      seen.insert(line);
    }
    for (const auto& l : seen) ++counts[l];
  }
  std::vector<std::string> out;
  for (const auto& [line, count] : counts)
    if (count * 2 > texts.size()) out.push_back(line);
  return out;  // std::map iteration is already sorted
}

namespace {

CompletionResponse request_samples(FeedbackContext& ctx, const std::string& body,
                                   int sample_count, RoleTag tag) {
  CompletionRequest req;
  req.messages = {{MessageRole::user, body}};
  req.temperature = ctx.diversification.temperature;
  req.max_output_tokens = ctx.diversification.max_output_tokens;
  req.sample_count = sample_count;
  req.role_tag = tag;

  CompletionResponse resp = ctx.gateway.complete(req);
  bool all_empty = std::all_of(resp.samples.begin(), resp.samples.end(),
                               [](const std::string& s) { return s.empty(); });
  if (all_empty) {
    // One retry with altered content so record/replay keys stay distinct.
    CompletionRequest retry = req;
    retry.messages.push_back(
        {MessageRole::user, "Your previous reply was empty. Write the full text."});
    resp = ctx.gateway.complete(retry);
    all_empty = std::all_of(resp.samples.begin(), resp.samples.end(),
                            [](const std::string& s) { return s.empty(); });
    if (all_empty)
      throw Error(ErrorKind::malformed_response,
                  "backend returned empty feedback twice");
  }
  return resp;
}

std::string render_reviews_block(const std::vector<std::string>& samples) {
  std::ostringstream out;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (i > 0) out << "\n\n";
    out << "<review index=\"" << i << "\">\n" << samples[i] << "\n</review>";
  }
  return out.str();
}

FeedbackSignal generate_feedback(FeedbackContext& ctx, Polarity polarity,
                                 const Prompt& prompt,
                                 const std::vector<PredictionRecord>& records,
                                 const std::string& batch_id) {
  if (records.empty())
    throw Error(ErrorKind::config, "feedback requested with no records");
  ctx.diversification.validate();
  const int k = ctx.diversification.k;

  const std::string& tmpl = polarity == Polarity::negative
                                ? ctx.templates.negative_feedback
                                : ctx.templates.positive_feedback;
  const std::string body = render_template(
      tmpl, {{"current_prompt", prompt.text},
             {"examples_block",
              format_examples_block(records, ctx.diversification.examples_char_budget)}});

  CompletionResponse resp = request_samples(ctx, body, k, RoleTag::feedback);

  FeedbackSignal signal;
  signal.polarity = polarity;
  signal.prompt_id = prompt.id;
  signal.batch_id = batch_id;
  signal.k = k;
  for (const auto& s : resp.samples) signal.sample_ids.push_back(digest(s));

  if (k == 1) {
    signal.text = resp.samples.front();
    return signal;
  }
  signal.aggregate = true;

  bool identical = std::all_of(
      resp.samples.begin(), resp.samples.end(),
      [&](const std::string& s) { return s == resp.samples.front(); });
  if (identical) {
    // All k samples agree byte-for-byte; a summarize call would add nothing.
    signal.text = resp.samples.front();
    return signal;
  }

  if (ctx.diversification.aggregation == Aggregation::majority_directives) {
    auto lines = strict_majority_lines(resp.samples);
    std::string joined;
    for (const auto& l : lines) {
      if (!joined.empty()) joined += '\n';
      joined += l;
    }
    signal.text = joined.empty() ? "NO CHANGES" : joined;
    return signal;
  }

  const std::string summarize_body = render_template(
      ctx.templates.summarize_feedback,
      {{"k", std::to_string(k)}, {"k_reviews", render_reviews_block(resp.samples)}});
  CompletionResponse summary =
      request_samples(ctx, summarize_body, 1, RoleTag::summarize);
  signal.text = summary.samples.front();
  return signal;
}

}  // namespace

FeedbackSignal generate_negative_feedback(FeedbackContext& ctx, const Prompt& prompt,
                                          const std::vector<PredictionRecord>& incorrect,
                                          const std::string& batch_id) {
  return generate_feedback(ctx, Polarity::negative, prompt, incorrect, batch_id);
}

FeedbackSignal generate_positive_feedback(FeedbackContext& ctx, const Prompt& prompt,
                                          const std::vector<PredictionRecord>& correct,
                                          const std::string& batch_id) {
  return generate_feedback(ctx, Polarity::positive, prompt, correct, batch_id);
}

FeedbackBundle compose_bundle(FeedbackContext& ctx, const Prompt& prompt,
                              const std::vector<PredictionRecord>& records,
                              int depth, const ReinforcementSchedule& schedule,
                              const std::string& batch_id) {
  if (records.empty())
    throw Error(ErrorKind::config, "compose_bundle called with no records");

  auto [correct, incorrect] = partition_records(records);
  FeedbackBundle bundle;
  bundle.depth = depth;

  if (!incorrect.empty())
    bundle.negative = generate_negative_feedback(ctx, prompt, incorrect, batch_id);
  if (schedule.positive_active(depth) && !correct.empty())
    bundle.positive = generate_positive_feedback(ctx, prompt, correct, batch_id);

  if (!bundle.negative && !bundle.positive)
    throw EmptyBundleError(
        "all records correct and positive reinforcement inactive at depth " +
        std::to_string(depth));
  return bundle;
}

}  // namespace bread
