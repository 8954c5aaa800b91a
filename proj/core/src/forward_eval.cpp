#include "bread/forward_eval.hpp"

#include "bread/errors.hpp"

namespace bread {

nlohmann::json PredictionRecord::to_json() const {
  nlohmann::json j{{"example_id", example_id},
                   {"gold", gold_label},
                   {"raw_output", raw_output},
                   {"correct", correct}};
  j["extracted"] = extracted ? nlohmann::json(*extracted) : nlohmann::json();
  return j;
}

nlohmann::json EvaluationReport::summary_json() const {
  return {{"prompt_id", prompt_id}, {"split", split}, {"accuracy", accuracy}, {"n", n}};
}

bool ExactMatchScorer::correct(const PredictionRecord& record,
                               const TaskSpec&) const {
  return record.extracted && *record.extracted == record.gold_label;
}

std::vector<PredictionRecord> forward_generate(const Prompt& prompt,
                                               const std::vector<Example>& batch,
                                               const TaskSpec& task, Gateway& gateway,
                                               const GenParams& params,
                                               RoleTag role_tag) {
  if (batch.empty())
    throw Error(ErrorKind::task, "forward_generate called with an empty batch");

  const std::string system_text = prompt.text + "\n\n" + format_suffix(task.answer_format);
  const ExactMatchScorer scorer;
  std::vector<PredictionRecord> records;
  records.reserve(batch.size());
  for (const auto& ex : batch) {
    CompletionRequest req;
    req.messages = {{MessageRole::system, system_text},
                    {MessageRole::user, ex.input_text}};
    req.temperature = params.forward_temperature;
    req.max_output_tokens = params.max_output_tokens;
    req.sample_count = 1;
    req.role_tag = role_tag;

    CompletionResponse resp;
    try {
      resp = gateway.complete(req);
    } catch (const Error& e) {
      throw Error(e.kind(), "example " + ex.id + ": " + e.what());
    }
    PredictionRecord rec;
    rec.example_id = ex.id;
    rec.input_text = ex.input_text;
    rec.gold_label = ex.gold_label;
    rec.raw_output = resp.samples.front();
    rec.extracted = extract_answer(rec.raw_output, task);
    rec.correct = scorer.correct(rec, task);
    records.push_back(std::move(rec));
  }
  return records;
}

std::pair<std::vector<PredictionRecord>, std::vector<PredictionRecord>>
partition_records(const std::vector<PredictionRecord>& records) {
  std::pair<std::vector<PredictionRecord>, std::vector<PredictionRecord>> out;
  for (const auto& r : records)
    (r.correct ? out.first : out.second).push_back(r);
  return out;
}

Evaluator::Evaluator(const TaskSpec& task, Gateway& gateway, GenParams params)
    : task_(task), gateway_(gateway), params_(params) {}

const EvaluationReport& Evaluator::evaluate(const Prompt& prompt,
                                            const std::string& split_name) {
  const std::string key =
      prompt.id + "|" + split_name + "|" + gateway_.backend_id();
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;

  const auto& split = task_.split(split_name);
  if (split.empty())
    throw Error(ErrorKind::task, "split " + split_name + " is empty");

  EvaluationReport report;
  report.prompt_id = prompt.id;
  report.split = split_name;
  report.records =
      forward_generate(prompt, split, task_, gateway_, params_, RoleTag::evaluation);
  report.n = static_cast<int>(report.records.size());
  int correct = 0;
  for (const auto& r : report.records) correct += r.correct ? 1 : 0;
  report.accuracy = static_cast<double>(correct) / report.n;

  if (on_fresh_report) on_fresh_report(report);
  return cache_.emplace(key, std::move(report)).first->second;
}

nlohmann::json Evaluator::cache_to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, report] : cache_) {
    j[key] = {{"prompt_id", report.prompt_id},
              {"split", report.split},
              {"accuracy", report.accuracy},
              {"n", report.n}};
  }
  return j;
}

void Evaluator::restore_cache(const nlohmann::json& j) {
  for (const auto& [key, entry] : j.items()) {
    EvaluationReport report;
    report.prompt_id = entry.at("prompt_id").get<std::string>();
    report.split = entry.at("split").get<std::string>();
    report.accuracy = entry.at("accuracy").get<double>();
    report.n = entry.at("n").get<int>();
    cache_.emplace(key, std::move(report));
  }
}

}  // namespace bread
