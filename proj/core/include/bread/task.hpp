#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bread/rng.hpp"

namespace bread {

enum class AnswerFormat { tagged_answer, option_letter, free_label };

const char* to_string(AnswerFormat fmt);
AnswerFormat answer_format_from_string(const std::string& s);

struct Example {
  std::string id;
  std::string input_text;
  std::string gold_label;  // normalized

  bool operator==(const Example&) const = default;
};

struct Batch {
  std::vector<Example> examples;
  std::string batch_id;
  uint64_t seed = 0;
};

struct TaskSpec {
  std::string name;
  AnswerFormat answer_format = AnswerFormat::tagged_answer;
  std::vector<std::string> label_set;                 // normalized; empty = open-ended
  std::map<std::string, std::string> label_aliases;   // normalized alias -> label
  std::string default_prompt;
  std::string expert_prompt;                          // empty when the task has none
  int recommended_pr_depth = 3;
  std::vector<Example> train;
  std::vector<Example> validation;
  std::vector<Example> test;

  bool has_expert_prompt() const { return !expert_prompt.empty(); }
  const std::vector<Example>& split(const std::string& split_name) const;
};

/// Lowercases, strips punctuation to spaces, and collapses whitespace.
std::string normalize_label(std::string_view raw);

/// Maps a normalized candidate through the task's alias table; returns the
/// label when the candidate names a label (directly or via alias), otherwise
/// nothing.
std::optional<std::string> resolve_label(const std::string& normalized,
                                         const TaskSpec& task);

/// Loads and validates a task manifest (JSON) plus its split files (JSON
/// lines of {id, input, label}). Paths in the manifest are resolved relative
/// to the manifest's directory.
TaskSpec load_task(const std::string& manifest_path);

/// Returns the extracted, normalized answer, or nothing when the output is
/// unparseable (callers count that as incorrect).
std::optional<std::string> extract_answer(const std::string& raw_output,
                                          const TaskSpec& task);

/// Instruction appended to the system message after the optimizable prompt
/// text, so the optimizer can never delete the parse contract.
std::string format_suffix(AnswerFormat fmt);

/// Uniform draw without replacement from the train split.
Batch sample_batch(const TaskSpec& task, size_t batch_size, Rng& rng);

}  // namespace bread
