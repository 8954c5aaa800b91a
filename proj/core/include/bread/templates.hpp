#pragma once

#include <map>
#include <string>

namespace bread {

/// Prompt templates for the optimizer-side calls. Placeholders are expanded
/// by exact string substitution of {name}; unknown braces in surrounding text
/// are left untouched.
struct TemplateSet {
  std::string negative_feedback;
  std::string positive_feedback;
  std::string summarize_feedback;
  std::string update_prompt;

  /// Compiled-in defaults, kept byte-identical to the files shipped under
  /// assets/templates.
  static TemplateSet builtin();

  /// Loads *.txt overrides from a directory; files not present keep the
  /// builtin text.
  static TemplateSet load_dir(const std::string& dir);
};

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars);

}  // namespace bread
