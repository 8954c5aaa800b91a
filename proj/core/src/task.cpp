#include "bread/task.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bread/errors.hpp"
#include "bread/hash.hpp"

namespace bread {

namespace fs = std::filesystem;

const char* to_string(AnswerFormat fmt) {
  switch (fmt) {
    case AnswerFormat::tagged_answer: return "tagged_answer";
    case AnswerFormat::option_letter: return "option_letter";
    case AnswerFormat::free_label: return "free_label";
  }
  return "tagged_answer";
}

AnswerFormat answer_format_from_string(const std::string& s) {
  if (s == "tagged_answer") return AnswerFormat::tagged_answer;
  if (s == "option_letter") return AnswerFormat::option_letter;
  if (s == "free_label") return AnswerFormat::free_label;
  throw Error(ErrorKind::task, "unknown answer format: " + s);
}

const std::vector<Example>& TaskSpec::split(const std::string& split_name) const {
  if (split_name == "train") return train;
  if (split_name == "validation") return validation;
  if (split_name == "test") return test;
  throw Error(ErrorKind::task, "unknown split: " + split_name);
}

std::string normalize_label(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (std::isalnum(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending_space = true;
    }
  }
  return out;
}

std::optional<std::string> resolve_label(const std::string& normalized,
                                         const TaskSpec& task) {
  if (normalized.empty()) return std::nullopt;
  if (task.label_set.empty()) return normalized;
  if (std::find(task.label_set.begin(), task.label_set.end(), normalized) !=
      task.label_set.end())
    return normalized;
  auto it = task.label_aliases.find(normalized);
  if (it != task.label_aliases.end()) return it->second;
  return std::nullopt;
}

namespace {

std::optional<std::string> last_standalone_letter(const std::string& text) {
  std::optional<std::string> found;
  for (size_t i = 0; i < text.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (!std::isalpha(c)) continue;
    char lower = static_cast<char>(std::tolower(c));
    if (lower < 'a' || lower > 'l') continue;
    bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1]));
    bool right_ok =
        i + 1 >= text.size() || !std::isalnum(static_cast<unsigned char>(text[i + 1]));
    if (left_ok && right_ok) found = std::string(1, lower);
  }
  return found;
}

std::string final_nonempty_line(const std::string& text) {
  size_t end = text.size();
  while (end > 0) {
    size_t start = text.find_last_of('\n', end - 1);
    size_t from = start == std::string::npos ? 0 : start + 1;
    std::string line = text.substr(from, end - from);
    if (normalize_label(line).size() > 0) return line;
    if (start == std::string::npos) break;
    end = start;
  }
  return text;
}

std::optional<std::string> extract_tagged(const std::string& raw, const TaskSpec& task) {
  static const std::string open = "<answer>";
  static const std::string close = "</answer>";
  size_t pos = raw.rfind(open);
  if (pos != std::string::npos) {
    size_t start = pos + open.size();
    size_t stop = raw.find(close, start);
    if (stop != std::string::npos)
      return resolve_label(normalize_label(raw.substr(start, stop - start)), task);
  }
  // No tags: accept the whole text when it already is a bare label, which
  // also makes extraction idempotent on its own outputs.
  return resolve_label(normalize_label(raw), task);
}

std::optional<std::string> extract_option_letter(const std::string& raw,
                                                 const TaskSpec& task) {
  if (auto letter = last_standalone_letter(raw)) {
    if (auto resolved = resolve_label(*letter, task)) return resolved;
  }
  return resolve_label(normalize_label(final_nonempty_line(raw)), task);
}

std::optional<std::string> extract_free_label(const std::string& raw,
                                              const TaskSpec& task) {
  const std::string line = normalize_label(final_nonempty_line(raw));
  if (line.empty()) return std::nullopt;
  if (task.label_set.empty()) return line;

  std::optional<std::string> best;
  size_t best_len = 0;
  size_t best_pos = 0;
  auto consider = [&](const std::string& surface, const std::string& label) {
    if (surface.empty()) return;
    size_t pos = line.rfind(surface);
    if (pos == std::string::npos) return;
    if (surface.size() > best_len ||
        (surface.size() == best_len && pos > best_pos)) {
      best = label;
      best_len = surface.size();
      best_pos = pos;
    }
  };
  for (const auto& label : task.label_set) consider(label, label);
  for (const auto& [alias, label] : task.label_aliases) consider(alias, label);
  return best;
}

}  // namespace

std::optional<std::string> extract_answer(const std::string& raw_output,
                                          const TaskSpec& task) {
  switch (task.answer_format) {
    case AnswerFormat::tagged_answer: return extract_tagged(raw_output, task);
    case AnswerFormat::option_letter: return extract_option_letter(raw_output, task);
    case AnswerFormat::free_label: return extract_free_label(raw_output, task);
  }
  return std::nullopt;
}

std::string format_suffix(AnswerFormat fmt) {
  switch (fmt) {
    case AnswerFormat::tagged_answer:
      return "Wrap your final answer in <answer></answer> tags.";
    case AnswerFormat::option_letter:
      return "Finish your response with the single letter of the chosen option.";
    case AnswerFormat::free_label:
      return "Finish your response with the final answer on its own line.";
  }
  return "";
}

namespace {

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::task, "cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<Example> load_split(const fs::path& path, size_t declared_size,
                                const TaskSpec& task, const std::string& split_name) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::task,
                "missing split file for " + split_name + ": " + path.string());
  std::vector<Example> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::task, path.string() + ":" + std::to_string(line_no) +
                                       ": bad json: " + e.what());
    }
    Example ex;
    ex.id = j.at("id").get<std::string>();
    ex.input_text = j.at("input").get<std::string>();
    std::string raw_label = j.at("label").get<std::string>();

    std::string normalized = normalize_label(raw_label);
    auto resolved = resolve_label(normalized, task);
    if (!resolved && task.answer_format == AnswerFormat::option_letter) {
      // Labels written as full option text ("C) 70 cm") reduce to the letter.
      resolved = extract_option_letter(raw_label, task);
    }
    if (!resolved)
      throw Error(ErrorKind::task, path.string() + ":" + std::to_string(line_no) +
                                       ": label '" + raw_label +
                                       "' is outside the declared label set");
    ex.gold_label = *resolved;
    out.push_back(std::move(ex));
  }
  if (out.size() != declared_size)
    throw Error(ErrorKind::task,
                split_name + " split has " + std::to_string(out.size()) +
                    " rows, manifest declares " + std::to_string(declared_size));
  return out;
}

}  // namespace

TaskSpec load_task(const std::string& manifest_path) {
  fs::path mpath(manifest_path);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(mpath));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::task,
                "bad manifest " + manifest_path + ": " + e.what());
  }
  fs::path base = mpath.parent_path();

  TaskSpec task;
  task.name = manifest.at("name").get<std::string>();
  task.answer_format =
      answer_format_from_string(manifest.at("answer_format").get<std::string>());
  for (const auto& l : manifest.value("label_set", nlohmann::json::array()))
    task.label_set.push_back(normalize_label(l.get<std::string>()));
  if (manifest.contains("label_aliases"))
    for (const auto& [alias, label] : manifest.at("label_aliases").items())
      task.label_aliases[normalize_label(alias)] =
          normalize_label(label.get<std::string>());
  for (const auto& [alias, label] : task.label_aliases)
    if (std::find(task.label_set.begin(), task.label_set.end(), label) ==
        task.label_set.end())
      throw Error(ErrorKind::task, "alias '" + alias + "' maps outside the label set");

  const auto& prompts = manifest.at("prompts");
  task.default_prompt = trim(read_text_file(base / prompts.at("default").get<std::string>()));
  if (task.default_prompt.empty())
    throw Error(ErrorKind::task, "default prompt is empty for task " + task.name);
  if (prompts.contains("expert"))
    task.expert_prompt = trim(read_text_file(base / prompts.at("expert").get<std::string>()));
  task.recommended_pr_depth = manifest.value("recommended_pr_depth", 3);

  const auto& splits = manifest.at("splits");
  auto load = [&](const char* split_name) {
    const auto& s = splits.at(split_name);
    return load_split(base / s.at("path").get<std::string>(),
                      s.at("size").get<size_t>(), task, split_name);
  };
  task.train = load("train");
  task.validation = load("validation");
  task.test = load("test");

  std::set<std::string> seen;
  for (const auto* split : {&task.train, &task.validation, &task.test})
    for (const auto& ex : *split)
      if (!seen.insert(ex.id).second)
        throw Error(ErrorKind::task, "duplicate example id across splits: " + ex.id);

  return task;
}

Batch sample_batch(const TaskSpec& task, size_t batch_size, Rng& rng) {
  if (batch_size < 1 || batch_size > task.train.size())
    throw Error(ErrorKind::task,
                "batch_size " + std::to_string(batch_size) +
                    " out of range for train split of " +
                    std::to_string(task.train.size()));
  uint64_t seed_before = rng.state();
  auto idx = rng.sample_without_replacement(task.train.size(), batch_size);
  Batch batch;
  batch.seed = seed_before;
  std::string key;
  for (size_t i : idx) {
    batch.examples.push_back(task.train[i]);
    key += task.train[i].id;
    key += '\n';
  }
  batch.batch_id = digest(key);
  return batch;
}

}  // namespace bread
