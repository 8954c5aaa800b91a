#include "bread/world.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "bread/errors.hpp"
#include "bread/feedback.hpp"
#include "bread/hash.hpp"
#include "bread/rng.hpp"

namespace bread {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

/// Text between the first <tag> and the following </tag>; empty if absent.
std::string extract_span(const std::string& text, const std::string& tag) {
  const std::string open = "<" + tag + ">";
  const std::string close = "</" + tag + ">";
  size_t start = text.find(open);
  if (start == std::string::npos) return "";
  start += open.size();
  size_t stop = text.find(close, start);
  if (stop == std::string::npos) return "";
  return trim(text.substr(start, stop - start));
}

std::string concatenated_content(const CompletionRequest& req) {
  std::string all;
  for (const auto& m : req.messages) {
    all += m.content;
    all += '\n';
  }
  return all;
}

int64_t count_words(const std::string& text) {
  std::istringstream in(text);
  std::string w;
  int64_t n = 0;
  while (in >> w) ++n;
  return n;
}

}  // namespace

TokenWorld TokenWorld::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open world file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::io, "bad world json " + path + ": " + e.what());
  }
  return from_json(j);
}

TokenWorld TokenWorld::from_json(const nlohmann::json& j) {
  TokenWorld w;
  w.name = j.value("name", "world");
  w.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
  w.labels = j.at("labels").get<std::vector<std::string>>();
  w.noise = j.value("noise", 0.0);
  w.drop_rate = j.value("drop_rate", 0.0);
  w.seed = j.value("seed", 0ULL);
  w.default_prompt = j.at("default_prompt").get<std::string>();
  w.expert_prompt = j.value("expert_prompt", "");
  for (const auto& e : j.at("examples")) {
    WorldExample ex;
    ex.id = e.at("id").get<std::string>();
    ex.input_text = e.at("input").get<std::string>();
    ex.gold = e.at("gold").get<std::string>();
    ex.required = e.value("required", std::vector<std::string>{});
    ex.forbidden = e.value("forbidden", std::vector<std::string>{});
    w.examples.push_back(std::move(ex));
  }
  for (const auto& [split_name, ids] : j.at("splits").items())
    w.splits[split_name] = ids.get<std::vector<std::string>>();
  w.validate();
  return w;
}

nlohmann::json TokenWorld::to_json() const {
  nlohmann::json examples_json = nlohmann::json::array();
  for (const auto& ex : examples)
    examples_json.push_back({{"id", ex.id},
                             {"input", ex.input_text},
                             {"gold", ex.gold},
                             {"required", ex.required},
                             {"forbidden", ex.forbidden}});
  return {{"name", name},
          {"vocabulary", vocabulary},
          {"labels", labels},
          {"noise", noise},
          {"drop_rate", drop_rate},
          {"seed", seed},
          {"default_prompt", default_prompt},
          {"expert_prompt", expert_prompt},
          {"examples", examples_json},
          {"splits", splits}};
}

void TokenWorld::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write world file: " + path);
  out << to_json().dump(2) << "\n";
}

void TokenWorld::validate() const {
  if (labels.empty()) throw Error(ErrorKind::config, "world has no labels");
  if (noise < 0 || noise > 1 || drop_rate < 0 || drop_rate > 1)
    throw Error(ErrorKind::config, "world noise/drop_rate outside [0,1]");
  std::set<std::string> vocab(vocabulary.begin(), vocabulary.end());
  if (vocab.size() != vocabulary.size())
    throw Error(ErrorKind::config, "world vocabulary has duplicates");
  std::set<std::string> ids;
  std::set<std::string> inputs;
  for (const auto& ex : examples) {
    if (!ids.insert(ex.id).second)
      throw Error(ErrorKind::config, "duplicate world example id: " + ex.id);
    if (!inputs.insert(ex.input_text).second)
      throw Error(ErrorKind::config, "duplicate world example input: " + ex.id);
    if (std::find(labels.begin(), labels.end(), ex.gold) == labels.end())
      throw Error(ErrorKind::config, "world gold outside labels: " + ex.id);
    for (const auto& t : ex.required) {
      if (!vocab.count(t))
        throw Error(ErrorKind::config, "required token outside vocabulary: " + t);
      if (std::find(ex.forbidden.begin(), ex.forbidden.end(), t) != ex.forbidden.end())
        throw Error(ErrorKind::config,
                    "token both required and forbidden in " + ex.id + ": " + t);
    }
    for (const auto& t : ex.forbidden)
      if (!vocab.count(t))
        throw Error(ErrorKind::config, "forbidden token outside vocabulary: " + t);
  }
  for (const auto& [split_name, split_ids] : splits)
    for (const auto& id : split_ids)
      if (!ids.count(id))
        throw Error(ErrorKind::config,
                    "split " + split_name + " references unknown example " + id);
}

std::string TokenWorld::content_id() const { return digest(to_json().dump()); }

const WorldExample& TokenWorld::example_by_id(const std::string& id) const {
  for (const auto& ex : examples)
    if (ex.id == id) return ex;
  throw Error(ErrorKind::task, "world has no example with id " + id);
}

const WorldExample* TokenWorld::example_by_input(const std::string& input) const {
  for (const auto& ex : examples)
    if (ex.input_text == input) return &ex;
  return nullptr;
}

TaskSpec TokenWorld::to_task_spec() const {
  TaskSpec task;
  task.name = name;
  task.answer_format = AnswerFormat::tagged_answer;
  task.label_set = labels;
  task.default_prompt = default_prompt;
  task.expert_prompt = expert_prompt;
  task.recommended_pr_depth = 3;
  auto fill = [&](const char* split_name, std::vector<Example>& out) {
    auto it = splits.find(split_name);
    if (it == splits.end()) return;
    for (const auto& id : it->second) {
      const auto& ex = example_by_id(id);
      out.push_back({ex.id, ex.input_text, ex.gold});
    }
  };
  fill("train", task.train);
  fill("validation", task.validation);
  fill("test", task.test);
  return task;
}

std::vector<std::string> TokenWorld::prompt_tokens(const std::string& prompt_text) const {
  std::set<std::string> vocab(vocabulary.begin(), vocabulary.end());
  std::set<std::string> found;
  std::istringstream in(prompt_text);
  std::string word;
  while (in >> word)
    if (vocab.count(word)) found.insert(word);
  return {found.begin(), found.end()};
}

bool TokenWorld::satisfies(const std::string& prompt_text,
                           const WorldExample& ex) const {
  auto tokens = prompt_tokens(prompt_text);
  std::set<std::string> present(tokens.begin(), tokens.end());
  for (const auto& t : ex.required)
    if (!present.count(t)) return false;
  for (const auto& t : ex.forbidden)
    if (present.count(t)) return false;
  return true;
}

double TokenWorld::split_accuracy(const std::string& prompt_text,
                                  const std::string& split_name) const {
  auto it = splits.find(split_name);
  if (it == splits.end() || it->second.empty())
    throw Error(ErrorKind::task, "world split missing or empty: " + split_name);
  int correct = 0;
  for (const auto& id : it->second)
    correct += satisfies(prompt_text, example_by_id(id)) ? 1 : 0;
  return static_cast<double>(correct) / it->second.size();
}

std::string world_answer(const TokenWorld& world, const std::string& prompt_text,
                         const WorldExample& ex) {
  std::string label;
  if (world.satisfies(prompt_text, ex)) {
    label = ex.gold;
  } else {
    auto it = std::find(world.labels.begin(), world.labels.end(), ex.gold);
    size_t idx = static_cast<size_t>(it - world.labels.begin());
    label = world.labels[(idx + 1) % world.labels.size()];
  }
  return "<answer>" + label + "</answer>";
}

std::vector<std::string> world_feedback_directives(
    const TokenWorld& world, const std::string& prompt_text,
    const std::vector<std::pair<std::string, bool>>& example_correctness) {
  auto tokens = world.prompt_tokens(prompt_text);
  std::set<std::string> present(tokens.begin(), tokens.end());
  std::set<std::string> lines;
  for (const auto& [id, correct] : example_correctness) {
    const WorldExample& ex = world.example_by_id(id);
    if (correct) {
      for (const auto& t : ex.required)
        if (present.count(t)) lines.insert("KEEP " + t);
    } else {
      for (const auto& t : ex.required)
        if (!present.count(t)) lines.insert("ADD " + t);
      for (const auto& t : ex.forbidden)
        if (present.count(t)) lines.insert("REMOVE " + t);
    }
  }
  return {lines.begin(), lines.end()};
}

std::string world_summarize(const std::vector<std::string>& reviews) {
  auto lines = strict_majority_lines(reviews);
  if (lines.empty()) return "NO CHANGES";
  std::string out;
  for (const auto& l : lines) {
    if (!out.empty()) out += '\n';
    out += l;
  }
  return out;
}

std::string world_update(const TokenWorld& world, const std::string& prompt_text,
                         const std::vector<std::string>& directive_lines, Rng& rng) {
  auto parent_tokens = world.prompt_tokens(prompt_text);
  std::set<std::string> current(parent_tokens.begin(), parent_tokens.end());
  std::set<std::string> parent(current);
  std::set<std::string> keeps;
  std::set<std::string> vocab(world.vocabulary.begin(), world.vocabulary.end());

  for (const auto& raw : directive_lines) {
    std::istringstream in(raw);
    std::string verb, token;
    if (!(in >> verb >> token)) continue;
    if (!vocab.count(token)) continue;
    if (verb == "ADD")
      current.insert(token);
    else if (verb == "REMOVE")
      current.erase(token);
    else if (verb == "KEEP")
      keeps.insert(token);
  }

  // Drops model the baseline's instruction loss: only tokens that were
  // already in the prompt are at risk, and KEEP shields them.
  for (const auto& t : parent) {
    if (!current.count(t) || keeps.count(t)) continue;
    if (rng.bernoulli(world.drop_rate)) current.erase(t);
  }

  std::string text;
  for (const auto& t : current) {
    if (!text.empty()) text += ' ';
    text += t;
  }
  if (text.empty()) text = "follow the task instructions";
  return text;
}

WorldBackend::WorldBackend(TokenWorld world) : world_(std::move(world)) {
  world_.validate();
  for (size_t i = 0; i < world_.examples.size(); ++i)
    by_input_[world_.examples[i].input_text] = i;
}

CompletionResponse WorldBackend::generate(const CompletionRequest& request) {
  const std::string canonical = canonical_request_string(request);
  const uint64_t content_hash = fnv1a64(canonical);
  CompletionResponse resp;

  switch (request.role_tag) {
    case RoleTag::target_forward:
    case RoleTag::evaluation: {
      std::string prompt_text;
      std::string input;
      for (const auto& m : request.messages) {
        if (m.role == MessageRole::system && prompt_text.empty())
          prompt_text = m.content;
        if (m.role == MessageRole::user) input = m.content;
      }
      auto it = by_input_.find(input);
      if (it == by_input_.end())
        throw Error(ErrorKind::task, "world has no example matching the input");
      const std::string answer =
          world_answer(world_, prompt_text, world_.examples[it->second]);
      for (int i = 0; i < request.sample_count; ++i) resp.samples.push_back(answer);
      break;
    }
    case RoleTag::feedback: {
      const std::string all = concatenated_content(request);
      const std::string prompt_text = extract_span(all, "current_prompt");
      std::vector<std::pair<std::string, bool>> correctness;
      size_t pos = 0;
      while ((pos = all.find("[example id=", pos)) != std::string::npos) {
        size_t id_start = pos + 12;
        size_t id_end = all.find(' ', id_start);
        size_t bracket = all.find(']', id_start);
        if (id_end == std::string::npos || bracket == std::string::npos ||
            id_end > bracket)
          break;
        std::string id = all.substr(id_start, id_end - id_start);
        bool correct = all.compare(id_end + 1, 12, "correct=true") == 0;
        correctness.emplace_back(std::move(id), correct);
        pos = bracket;
      }
      if (correctness.empty())
        throw Error(ErrorKind::malformed_response,
                    "feedback request quotes no examples");
      auto base = world_feedback_directives(world_, prompt_text, correctness);
      for (int s = 0; s < request.sample_count; ++s) {
        auto lines = base;
        Rng rng(derive_seed(world_.seed, "noise", content_hash,
                            static_cast<uint64_t>(s)));
        if (rng.bernoulli(world_.noise)) {
          const std::string verb = rng.bernoulli(0.5) ? "ADD " : "REMOVE ";
          const std::string& token =
              world_.vocabulary[rng.uniform_below(world_.vocabulary.size())];
          lines.push_back(verb + token);
        }
        std::string text;
        for (const auto& l : lines) {
          if (!text.empty()) text += '\n';
          text += l;
        }
        resp.samples.push_back(text.empty() ? "NO CHANGES" : text);
      }
      break;
    }
    case RoleTag::summarize: {
      const std::string all = concatenated_content(request);
      std::vector<std::string> reviews;
      size_t pos = 0;
      while ((pos = all.find("<review index=", pos)) != std::string::npos) {
        size_t open_end = all.find('>', pos);
        size_t close = all.find("</review>", pos);
        if (open_end == std::string::npos || close == std::string::npos) break;
        reviews.push_back(trim(all.substr(open_end + 1, close - open_end - 1)));
        pos = close + 9;
      }
      if (reviews.empty())
        throw Error(ErrorKind::malformed_response,
                    "summarize request contains no reviews");
      const std::string summary = world_summarize(reviews);
      for (int i = 0; i < request.sample_count; ++i) resp.samples.push_back(summary);
      break;
    }
    case RoleTag::update: {
      const std::string all = concatenated_content(request);
      const std::string prompt_text = extract_span(all, "current_prompt");
      std::vector<std::string> directives;
      for (const auto& span : {extract_span(all, "negative_feedback"),
                               extract_span(all, "positive_feedback")}) {
        std::istringstream in(span);
        std::string line;
        while (std::getline(in, line)) directives.push_back(line);
      }
      for (int s = 0; s < request.sample_count; ++s) {
        Rng rng(derive_seed(world_.seed, "drop", content_hash,
                            static_cast<uint64_t>(s)));
        const std::string text = world_update(world_, prompt_text, directives, rng);
        resp.samples.push_back("Revised prompt:\n<prompt>" + text + "</prompt>");
      }
      break;
    }
  }

  resp.finish_reasons.assign(resp.samples.size(), "stop");
  resp.usage.prompt_tokens = count_words(concatenated_content(request));
  for (const auto& s : resp.samples)
    resp.usage.completion_tokens += count_words(s);
  samples_generated_ += static_cast<int64_t>(resp.samples.size());
  return resp;
}

namespace {

std::string zero_pad(size_t v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

WorldExample prefix_example(const std::string& id,
                            const std::vector<std::string>& vocab, size_t depth,
                            const std::vector<std::string>& labels, size_t label_idx) {
  WorldExample ex;
  ex.id = id;
  ex.input_text = "case " + id + ": which instructions apply here?";
  ex.gold = labels[label_idx % labels.size()];
  ex.required.assign(vocab.begin(), vocab.begin() + static_cast<long>(depth));
  return ex;
}

}  // namespace

TokenWorld make_convergence_world(uint64_t seed) {
  TokenWorld w;
  w.name = "convergence";
  w.seed = seed;
  w.noise = 0.0;
  w.drop_rate = 0.0;
  w.labels = {"yes", "no"};
  for (size_t i = 0; i < 12; ++i) w.vocabulary.push_back("instr" + zero_pad(i, 2));
  w.default_prompt = "do the task well";
  w.expert_prompt.clear();

  // Train depths: eight at full depth so any small batch almost surely
  // contains one, plus a 1..12 ramp.
  std::vector<size_t> train_depths{12, 12, 12, 12, 12, 12, 12, 12,
                                   1,  2,  3,  4,  5,  6,  7,  8, 9, 10, 11, 12};
  std::vector<size_t> val_depths{12, 12, 12, 11, 10, 9, 8, 6, 4, 2};
  std::vector<size_t> test_depths{12, 12, 11, 10, 9, 8, 7, 5, 3, 1};

  size_t label_idx = 0;
  auto add_split = [&](const char* split_name, const char* id_prefix,
                       const std::vector<size_t>& depths) {
    for (size_t i = 0; i < depths.size(); ++i) {
      std::string id = std::string(id_prefix) + zero_pad(i, 2);
      w.examples.push_back(
          prefix_example(id, w.vocabulary, depths[i], w.labels, label_idx++));
      w.splits[split_name].push_back(id);
    }
  };
  add_split("train", "t", train_depths);
  add_split("validation", "v", val_depths);
  add_split("test", "s", test_depths);
  w.validate();
  return w;
}

TokenWorld make_migration_world(uint64_t seed) {
  TokenWorld w;
  w.name = "migration";
  w.seed = seed;
  w.noise = 0.2;
  w.drop_rate = 0.3;
  w.labels = {"alpha", "beta", "gamma"};
  std::vector<std::string> critical, fresh;
  for (size_t i = 0; i < 8; ++i) {
    critical.push_back("crit" + std::to_string(i));
    fresh.push_back("new" + std::to_string(i));
  }
  for (const auto& t : critical) w.vocabulary.push_back(t);
  for (const auto& t : fresh) w.vocabulary.push_back(t);
  for (size_t i = 0; i < 8; ++i) w.vocabulary.push_back("decoy" + std::to_string(i));

  w.default_prompt = "solve the task";
  w.expert_prompt.clear();
  for (const auto& t : critical) {
    if (!w.expert_prompt.empty()) w.expert_prompt += ' ';
    w.expert_prompt += t;
  }

  size_t label_idx = 0;
  auto add_split = [&](const char* split_name, const char* id_prefix) {
    for (size_t i = 0; i < 8; ++i) {
      for (const auto& [group, token] :
           std::vector<std::pair<std::string, std::string>>{
               {"c", critical[i]}, {"n", fresh[i]}}) {
        WorldExample ex;
        ex.id = std::string(id_prefix) + group + std::to_string(i);
        ex.input_text = "case " + ex.id + ": does the guidance cover this?";
        ex.gold = w.labels[label_idx++ % w.labels.size()];
        ex.required = {token};
        w.examples.push_back(std::move(ex));
        w.splits[split_name].push_back(w.examples.back().id);
      }
    }
  };
  add_split("train", "t");
  add_split("validation", "v");
  add_split("test", "s");
  w.validate();
  return w;
}

TokenWorld make_noisy_world(uint64_t seed) {
  TokenWorld w;
  w.name = "noisy";
  w.seed = seed;
  w.noise = 0.5;
  w.drop_rate = 0.0;
  w.labels = {"yes", "no"};
  for (size_t i = 0; i < 10; ++i) w.vocabulary.push_back("instr" + zero_pad(i, 2));
  w.default_prompt = "do the task well";

  std::vector<size_t> train_depths{10, 10, 10, 10, 10, 10, 1, 2, 3, 4,
                                   5,  6,  7,  8,  9,  10, 4, 6, 8, 10};
  std::vector<size_t> val_depths{10, 10, 10, 9, 8, 7, 6, 4, 3, 2};
  std::vector<size_t> test_depths{10, 10, 9, 8, 7, 6, 5, 4, 2, 1};

  size_t label_idx = 0;
  auto add_split = [&](const char* split_name, const char* id_prefix,
                       const std::vector<size_t>& depths) {
    for (size_t i = 0; i < depths.size(); ++i) {
      std::string id = std::string(id_prefix) + zero_pad(i, 2);
      w.examples.push_back(
          prefix_example(id, w.vocabulary, depths[i], w.labels, label_idx++));
      w.splits[split_name].push_back(id);
    }
  };
  add_split("train", "t", train_depths);
  add_split("validation", "v", val_depths);
  add_split("test", "s", test_depths);
  w.validate();
  return w;
}

}  // namespace bread
