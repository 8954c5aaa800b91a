#include "bread/prompt.hpp"

#include "bread/errors.hpp"
#include "bread/hash.hpp"

namespace bread {

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::default_prompt: return "default";
    case Provenance::expert: return "expert";
    case Provenance::updated: return "updated";
  }
  return "default";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "default") return Provenance::default_prompt;
  if (s == "expert") return Provenance::expert;
  if (s == "updated") return Provenance::updated;
  throw Error(ErrorKind::config, "unknown provenance: " + s);
}

std::string prompt_id_for(const std::string& text) { return digest(text); }

namespace {

void check_text(const std::string& text) {
  if (text.empty())
    throw Error(ErrorKind::update_parse, "prompt text is empty");
  if (text.size() > kMaxPromptChars)
    throw Error(ErrorKind::prompt_too_long,
                "prompt text has " + std::to_string(text.size()) +
                    " chars, limit is " + std::to_string(kMaxPromptChars));
}

}  // namespace

Prompt make_root_prompt(const std::string& text, Provenance provenance) {
  check_text(text);
  Prompt p;
  p.id = prompt_id_for(text);
  p.text = text;
  p.depth = 0;
  p.provenance = provenance;
  p.created_iteration = 0;
  return p;
}

Prompt make_child_prompt(const Prompt& parent, const std::string& text,
                         int created_iteration) {
  check_text(text);
  Prompt p;
  p.id = prompt_id_for(text);
  p.text = text;
  p.parent_id = parent.id;
  p.depth = parent.depth + 1;
  p.provenance = Provenance::updated;
  p.created_iteration = created_iteration;
  return p;
}

nlohmann::json Prompt::to_json() const {
  return {{"id", id},
          {"text", text},
          {"parent_id", parent_id},
          {"depth", depth},
          {"provenance", to_string(provenance)},
          {"created_iteration", created_iteration}};
}

Prompt Prompt::from_json(const nlohmann::json& j) {
  Prompt p;
  p.id = j.at("id").get<std::string>();
  p.text = j.at("text").get<std::string>();
  p.parent_id = j.value("parent_id", "");
  p.depth = j.at("depth").get<int>();
  p.provenance = provenance_from_string(j.at("provenance").get<std::string>());
  p.created_iteration = j.value("created_iteration", 0);
  return p;
}

}  // namespace bread
