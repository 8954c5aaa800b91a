#include "bread/templates.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bread/errors.hpp"

namespace bread {

namespace {

const char* kNegative = R"(You are reviewing a system prompt that produced wrong answers.

<current_prompt>
{current_prompt}
</current_prompt>

The examples below were answered incorrectly under this prompt.

<examples>
{examples_block}
</examples>

Write a short critique listing the specific revisions the prompt needs so that
these examples would be answered correctly. Ground every point in the examples
above and be concrete about what to add, remove, or reword.)";

const char* kPositive = R"(You are reviewing a system prompt that produced correct answers.

<current_prompt>
{current_prompt}
</current_prompt>

The examples below were answered correctly under this prompt.

<examples>
{examples_block}
</examples>

Identify which existing instructions in the prompt caused these correct
answers. List them as elements that must be preserved verbatim in any future
revision of the prompt.)";

const char* kSummarize = R"(You are consolidating {k} independent reviews of the same prompt.

{k_reviews}

Produce one consolidated review. Keep only the points mentioned consistently
across the reviews above; discard points raised by only a minority of them.)";

const char* kUpdate = R"(Revise the system prompt below using the feedback provided.

<current_prompt>
{current_prompt}
</current_prompt>

These examples were answered incorrectly under the current prompt.

<examples>
{examples_block}
</examples>

<negative_feedback>
{negative_feedback}
</negative_feedback>

{positive_block}

Write the complete revised prompt between <prompt> and </prompt> tags.)";

std::string read_if_exists(const std::filesystem::path& path,
                           const std::string& fallback) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return fallback;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TemplateSet TemplateSet::builtin() {
  return {kNegative, kPositive, kSummarize, kUpdate};
}

TemplateSet TemplateSet::load_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw Error(ErrorKind::config, "template directory not found: " + dir);
  TemplateSet t = builtin();
  fs::path base(dir);
  t.negative_feedback = read_if_exists(base / "negative_feedback.txt", t.negative_feedback);
  t.positive_feedback = read_if_exists(base / "positive_feedback.txt", t.positive_feedback);
  t.summarize_feedback = read_if_exists(base / "summarize_feedback.txt", t.summarize_feedback);
  t.update_prompt = read_if_exists(base / "update_prompt.txt", t.update_prompt);
  return t;
}

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars) {
  std::string out = tmpl;
  for (const auto& [key, value] : vars) {
    const std::string needle = "{" + key + "}";
    size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return out;
}

}  // namespace bread
