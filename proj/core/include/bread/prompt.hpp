#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace bread {

inline constexpr size_t kMaxPromptChars = 6000;

enum class Provenance { default_prompt, expert, updated };

const char* to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

/// The object being optimized. Identity is a pure function of the text, so
/// re-discovered prompts share ids (and cached evaluations) with their first
/// occurrence.
struct Prompt {
  std::string id;
  std::string text;
  std::string parent_id;  // empty for roots
  int depth = 0;
  Provenance provenance = Provenance::default_prompt;
  int created_iteration = 0;

  nlohmann::json to_json() const;
  static Prompt from_json(const nlohmann::json& j);
};

/// Root prompt at depth 0 with no parent. Throws on empty or over-length text.
Prompt make_root_prompt(const std::string& text, Provenance provenance);

/// Child prompt one level below the parent. Throws on empty or over-length text.
Prompt make_child_prompt(const Prompt& parent, const std::string& text,
                         int created_iteration);

std::string prompt_id_for(const std::string& text);

}  // namespace bread
