#include "bread/runner.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bread/errors.hpp"
#include "bread/feedback.hpp"
#include "bread/forward_eval.hpp"
#include "bread/gateway.hpp"
#include "bread/hash.hpp"
#include "bread/stats.hpp"
#include "bread/templates.hpp"
#include "bread/world.hpp"

namespace fs = std::filesystem;

namespace bread {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write file: " + path);
  out << content;
  if (!out) throw Error(ErrorKind::io, "write failed: " + path);
}

void write_file_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  write_file(tmp, content);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::io, "cannot replace " + path + ": " + ec.message());
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

nlohmann::json parse_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::io, path + ": " + e.what());
  }
}

std::string seed_dir_for(const std::string& out_dir, uint64_t seed) {
  return out_dir + "/seed_" + std::to_string(seed);
}

/// mean/std that tolerates single-seed runs (std reported as 0).
MeanStd loose_mean_std(const std::vector<double>& values) {
  if (values.size() >= 2) return mean_std(values);
  MeanStd ms;
  ms.n = static_cast<int>(values.size());
  ms.mean = values.empty() ? 0.0 : values[0];
  ms.std = 0.0;
  return ms;
}

std::string fmt_acc(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string fmt_mean_std(const MeanStd& ms) {
  if (ms.n == 0) return "-";
  if (ms.n == 1) return fmt_acc(ms.mean);
  return fmt_acc(ms.mean) + " ± " + fmt_acc(ms.std);
}

std::string fmt_signed_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.1f%%", v);
  return buf;
}

}  // namespace

const char* to_string(RunMode m) {
  return m == RunMode::migrate ? "migrate" : "optimize";
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "optimize") return RunMode::optimize;
  if (s == "migrate") return RunMode::migrate;
  throw Error(ErrorKind::config, "unknown run mode: " + s);
}

const char* to_string(InitialPromptSource s) {
  switch (s) {
    case InitialPromptSource::default_prompt: return "default";
    case InitialPromptSource::expert: return "expert";
    case InitialPromptSource::file: return "file";
  }
  return "default";
}

InitialPromptSource initial_source_from_string(const std::string& s) {
  if (s == "default") return InitialPromptSource::default_prompt;
  if (s == "expert") return InitialPromptSource::expert;
  if (s == "file") return InitialPromptSource::file;
  throw Error(ErrorKind::config, "unknown initial prompt source: " + s);
}

const char* to_string(SweepKind s) {
  return s == SweepKind::pr_depth ? "pr_depth" : "diversify_k";
}

void RunConfig::validate() const {
  search.validate();
  diversification.validate();
  update.validate();
  target.validate();
  if (optimizer) optimizer->validate();
  if (seeds.empty()) throw Error(ErrorKind::config, "at least one seed required");
  std::vector<uint64_t> sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error(ErrorKind::config, "seeds must be distinct");
  if (mode == RunMode::migrate && initial == InitialPromptSource::default_prompt)
    throw Error(ErrorKind::config,
                "migrate mode requires an expert or file initial prompt");
  if (initial == InitialPromptSource::file && initial_prompt_file.empty())
    throw Error(ErrorKind::config, "initial prompt source 'file' needs a path");
  if (out_dir.empty()) throw Error(ErrorKind::config, "out_dir must be set");
  if (task_manifest.empty() && world_task_file.empty() &&
      target.kind != BackendKind::synthetic_world)
    throw Error(ErrorKind::config, "no task: set a manifest or a world file");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j{
      {"label", label},
      {"task_manifest", task_manifest},
      {"world_task_file", world_task_file},
      {"target", target.to_json()},
      {"search",
       {{"strategy", to_string(search.strategy)},
        {"max_iterations", search.max_iterations},
        {"max_depth", search.max_depth},
        {"expansion_width", search.expansion_width},
        {"exploration_c", search.exploration_c},
        {"beam_width", search.beam_width},
        {"batch_size", search.batch_size}}},
      {"schedule",
       {{"positive_enabled", schedule.positive_enabled},
        {"positive_start_depth", schedule.positive_start_depth},
        {"gate_on_iteration", schedule.gate_on_iteration}}},
      {"diversification",
       {{"k", diversification.k},
        {"aggregation", to_string(diversification.aggregation)},
        {"temperature", diversification.temperature},
        {"max_output_tokens", diversification.max_output_tokens},
        {"examples_char_budget", diversification.examples_char_budget}}},
      {"update",
       {{"width", update.width},
        {"temperature", update.temperature},
        {"max_output_tokens", update.max_output_tokens},
        {"examples_char_budget", update.examples_char_budget}}},
      {"gen",
       {{"forward_temperature", gen.forward_temperature},
        {"max_output_tokens", gen.max_output_tokens}}},
      {"seeds", seeds},
      {"mode", to_string(mode)},
      {"initial", to_string(initial)},
      {"initial_prompt_file", initial_prompt_file},
      {"preset", preset},
      {"out_dir", out_dir},
      {"record", record},
      {"templates_dir", templates_dir},
  };
  if (optimizer) j["optimizer"] = optimizer->to_json();
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  c.label = j.value("label", "");
  c.task_manifest = j.value("task_manifest", "");
  c.world_task_file = j.value("world_task_file", "");
  c.target = BackendDescriptor::from_json(j.at("target"));
  if (j.contains("optimizer"))
    c.optimizer = BackendDescriptor::from_json(j.at("optimizer"));
  const auto& s = j.at("search");
  c.search.strategy = strategy_from_string(s.at("strategy").get<std::string>());
  c.search.max_iterations = s.at("max_iterations").get<int>();
  c.search.max_depth = s.at("max_depth").get<int>();
  c.search.expansion_width = s.at("expansion_width").get<int>();
  c.search.exploration_c = s.at("exploration_c").get<double>();
  c.search.beam_width = s.at("beam_width").get<int>();
  c.search.batch_size = s.at("batch_size").get<int>();
  const auto& sch = j.at("schedule");
  c.schedule.positive_enabled = sch.at("positive_enabled").get<bool>();
  c.schedule.positive_start_depth = sch.at("positive_start_depth").get<int>();
  c.schedule.gate_on_iteration = sch.at("gate_on_iteration").get<bool>();
  const auto& d = j.at("diversification");
  c.diversification.k = d.at("k").get<int>();
  c.diversification.aggregation =
      aggregation_from_string(d.at("aggregation").get<std::string>());
  c.diversification.temperature = d.at("temperature").get<double>();
  c.diversification.max_output_tokens = d.at("max_output_tokens").get<int>();
  c.diversification.examples_char_budget = d.at("examples_char_budget").get<int>();
  const auto& u = j.at("update");
  c.update.width = u.at("width").get<int>();
  c.update.temperature = u.at("temperature").get<double>();
  c.update.max_output_tokens = u.at("max_output_tokens").get<int>();
  c.update.examples_char_budget = u.at("examples_char_budget").get<int>();
  const auto& g = j.at("gen");
  c.gen.forward_temperature = g.at("forward_temperature").get<double>();
  c.gen.max_output_tokens = g.at("max_output_tokens").get<int>();
  c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  c.mode = run_mode_from_string(j.at("mode").get<std::string>());
  c.initial = initial_source_from_string(j.at("initial").get<std::string>());
  c.initial_prompt_file = j.value("initial_prompt_file", "");
  c.preset = j.value("preset", "");
  c.out_dir = j.value("out_dir", "");
  c.record = j.value("record", true);
  c.templates_dir = j.value("templates_dir", "");
  return c;
}

void apply_preset(RunConfig& config, const std::string& preset) {
  if (preset.empty()) return;
  if (preset == "baseline") {
    config.schedule.positive_enabled = false;
    config.diversification.k = 1;
  } else if (preset == "baseline+fd") {
    config.schedule.positive_enabled = false;
    config.diversification.k = 6;
  } else if (preset == "baseline+pr") {
    config.schedule.positive_enabled = true;
    config.diversification.k = 1;
  } else if (preset == "bread") {
    config.schedule.positive_enabled = true;
    config.diversification.k = 6;
  } else {
    throw Error(ErrorKind::config, "unknown preset: " + preset);
  }
  config.preset = preset;
}

namespace {

std::optional<BackendDescriptor> backend_from_doc(const ConfigDoc& doc,
                                                  const std::string& prefix) {
  if (!doc.has(prefix + ".kind")) return std::nullopt;
  BackendDescriptor b;
  b.kind = backend_kind_from_string(doc.get_string(prefix + ".kind"));
  b.endpoint = doc.get_string(prefix + ".endpoint", "");
  b.model = doc.get_string(prefix + ".model", "");
  b.auth_env = doc.get_string(prefix + ".auth_env", b.auth_env);
  b.fixture_path = doc.get_string(prefix + ".fixture", "");
  b.world_file = doc.get_string(prefix + ".world", "");
  b.max_in_flight = static_cast<int>(doc.get_int(prefix + ".max_in_flight", b.max_in_flight));
  b.retry.max_attempts =
      static_cast<int>(doc.get_int(prefix + ".retry_max_attempts", b.retry.max_attempts));
  b.retry.base_backoff_seconds =
      doc.get_double(prefix + ".retry_base_backoff", b.retry.base_backoff_seconds);
  b.retry.jitter = doc.get_bool(prefix + ".retry_jitter", b.retry.jitter);
  return b;
}

void overlay_doc(RunConfig& c, const ConfigDoc& doc) {
  c.label = doc.get_string("label", c.label);
  c.task_manifest = doc.get_string("task.manifest", c.task_manifest);
  if (auto target = backend_from_doc(doc, "backend.target")) c.target = *target;
  if (auto opt = backend_from_doc(doc, "backend.optimizer")) c.optimizer = opt;

  if (doc.has("search.strategy"))
    c.search.strategy = strategy_from_string(doc.get_string("search.strategy"));
  c.search.max_iterations =
      static_cast<int>(doc.get_int("search.iterations", c.search.max_iterations));
  c.search.max_depth = static_cast<int>(doc.get_int("search.max_depth", c.search.max_depth));
  c.search.expansion_width =
      static_cast<int>(doc.get_int("search.expansion_width", c.search.expansion_width));
  c.search.exploration_c = doc.get_double("search.exploration_c", c.search.exploration_c);
  c.search.beam_width = static_cast<int>(doc.get_int("search.beam_width", c.search.beam_width));
  c.search.batch_size = static_cast<int>(doc.get_int("search.batch_size", c.search.batch_size));

  c.schedule.positive_enabled = doc.get_bool("schedule.positive", c.schedule.positive_enabled);
  c.schedule.positive_start_depth = static_cast<int>(
      doc.get_int("schedule.pr_start_depth", c.schedule.positive_start_depth));
  c.schedule.gate_on_iteration =
      doc.get_bool("schedule.gate_on_iteration", c.schedule.gate_on_iteration);

  c.diversification.k = static_cast<int>(doc.get_int("diversification.k", c.diversification.k));
  if (doc.has("diversification.aggregation"))
    c.diversification.aggregation =
        aggregation_from_string(doc.get_string("diversification.aggregation"));
  c.diversification.temperature =
      doc.get_double("diversification.temperature", c.diversification.temperature);
  c.diversification.max_output_tokens = static_cast<int>(
      doc.get_int("diversification.max_output_tokens", c.diversification.max_output_tokens));
  c.diversification.examples_char_budget = static_cast<int>(doc.get_int(
      "diversification.examples_char_budget", c.diversification.examples_char_budget));

  c.update.temperature = doc.get_double("update.temperature", c.update.temperature);
  c.update.max_output_tokens =
      static_cast<int>(doc.get_int("update.max_output_tokens", c.update.max_output_tokens));
  c.update.examples_char_budget = static_cast<int>(
      doc.get_int("update.examples_char_budget", c.update.examples_char_budget));

  c.gen.forward_temperature = doc.get_double("gen.temperature", c.gen.forward_temperature);
  c.gen.max_output_tokens =
      static_cast<int>(doc.get_int("gen.max_output_tokens", c.gen.max_output_tokens));

  if (doc.has("run.seeds")) {
    c.seeds.clear();
    for (int64_t s : doc.get_int_array("run.seeds")) {
      if (s < 0) throw Error(ErrorKind::config, "seeds must be non-negative");
      c.seeds.push_back(static_cast<uint64_t>(s));
    }
  }
  c.out_dir = doc.get_string("run.out", c.out_dir);
  c.record = doc.get_bool("run.record", c.record);
  if (doc.has("run.initial"))
    c.initial = initial_source_from_string(doc.get_string("run.initial"));
  c.initial_prompt_file = doc.get_string("run.initial_file", c.initial_prompt_file);
  c.templates_dir = doc.get_string("run.templates_dir", c.templates_dir);
}

}  // namespace

RunConfig run_config_from_doc(const ConfigDoc& doc, RunMode mode,
                              const std::string& cli_preset) {
  RunConfig c;
  c.mode = mode;
  if (mode == RunMode::migrate) {
    c.initial = InitialPromptSource::expert;
    c.diversification.k = 2;
    c.schedule.positive_enabled = true;
    c.schedule.positive_start_depth = 0;
  }
  apply_preset(c, doc.get_string("preset", ""));
  overlay_doc(c, doc);
  apply_preset(c, cli_preset);
  if (c.label.empty()) c.label = c.preset.empty() ? to_string(c.mode) : c.preset;
  return c;
}

TaskSpec load_run_task(const RunConfig& config) {
  if (!config.task_manifest.empty()) return load_task(config.task_manifest);
  std::string world_path = config.world_task_file;
  if (world_path.empty() && config.target.kind == BackendKind::synthetic_world)
    world_path = config.target.world_file;
  if (world_path.empty())
    throw Error(ErrorKind::config, "no task manifest and no world file configured");
  return TokenWorld::load(world_path).to_task_spec();
}

nlohmann::json SeedOutcome::to_json() const {
  nlohmann::json j{
      {"seed", seed},
      {"failed", failed},
      {"initial", {{"validation", initial_validation}, {"test", initial_test}}},
      {"final", {{"validation", final_validation}, {"test", final_test}}},
      {"best_prompt", {{"id", best_prompt_id}, {"text", best_prompt_text}}},
      {"iterations", iterations},
      {"done_reason", done_reason},
      {"ledger", {{"samples", total_samples}, {"requests", total_requests}}},
      {"transcript_hash", transcript_hash},
  };
  if (failed) j["error"] = error;
  if (default_initial_validation)
    j["default_initial"] = {{"validation", *default_initial_validation},
                            {"test", default_initial_test.value_or(0.0)}};
  return j;
}

SeedOutcome SeedOutcome::from_json(const nlohmann::json& j) {
  SeedOutcome o;
  o.seed = j.at("seed").get<uint64_t>();
  o.failed = j.value("failed", false);
  o.error = j.value("error", "");
  o.initial_validation = j.at("initial").at("validation").get<double>();
  o.initial_test = j.at("initial").at("test").get<double>();
  if (j.contains("default_initial")) {
    o.default_initial_validation = j.at("default_initial").at("validation").get<double>();
    o.default_initial_test = j.at("default_initial").at("test").get<double>();
  }
  o.final_validation = j.at("final").at("validation").get<double>();
  o.final_test = j.at("final").at("test").get<double>();
  o.best_prompt_id = j.at("best_prompt").at("id").get<std::string>();
  o.best_prompt_text = j.at("best_prompt").at("text").get<std::string>();
  o.iterations = j.at("iterations").get<int>();
  o.done_reason = j.value("done_reason", "");
  o.total_samples = j.at("ledger").at("samples").get<int64_t>();
  o.total_requests = j.at("ledger").at("requests").get<int64_t>();
  o.transcript_hash = j.value("transcript_hash", "");
  return o;
}

std::vector<double> RunReport::validation_series() const {
  std::vector<double> out;
  for (const auto& s : seeds)
    if (!s.failed) out.push_back(s.final_validation);
  return out;
}

std::vector<double> RunReport::test_series() const {
  std::vector<double> out;
  for (const auto& s : seeds)
    if (!s.failed) out.push_back(s.final_test);
  return out;
}

std::vector<uint64_t> RunReport::seed_ids() const {
  std::vector<uint64_t> out;
  for (const auto& s : seeds)
    if (!s.failed) out.push_back(s.seed);
  return out;
}

int64_t RunReport::total_samples() const {
  int64_t sum = 0;
  for (const auto& s : seeds)
    if (!s.failed) sum += s.total_samples;
  return sum;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json seeds_json = nlohmann::json::array();
  for (const auto& s : seeds) seeds_json.push_back(s.to_json());
  nlohmann::json j{{"label", label},
                   {"mode", to_string(mode)},
                   {"task", task_name},
                   {"preset", preset},
                   {"seeds", seeds_json},
                   {"partial", partial}};
  auto val = validation_series();
  auto test = test_series();
  if (val.size() >= 2) {
    MeanStd mv = mean_std(val);
    MeanStd mt = mean_std(test);
    j["aggregate"] = {{"validation", {{"mean", mv.mean}, {"std", mv.std}, {"n", mv.n}}},
                      {"test", {{"mean", mt.mean}, {"std", mt.std}, {"n", mt.n}}}};
  }
  j["total_samples"] = total_samples();
  return j;
}

RunReport RunReport::from_json(const nlohmann::json& j) {
  RunReport r;
  r.label = j.at("label").get<std::string>();
  r.mode = run_mode_from_string(j.at("mode").get<std::string>());
  r.task_name = j.value("task", "");
  r.preset = j.value("preset", "");
  for (const auto& s : j.at("seeds")) r.seeds.push_back(SeedOutcome::from_json(s));
  r.partial = j.value("partial", false);
  return r;
}

std::string transcript_hash_of_file(const std::string& trace_path) {
  return digest(read_file(trace_path));
}

namespace {

struct SeedArtifacts {
  std::string trace_path;
  std::string checkpoint_path;
  std::string fixture_path;
  std::string ledger_path;
  std::string evals_dir;
};

SeedArtifacts artifacts_for(const std::string& seed_dir) {
  return {seed_dir + "/trace.jsonl", seed_dir + "/checkpoint.json",
          seed_dir + "/fixture.jsonl", seed_dir + "/ledger.json",
          seed_dir + "/evals"};
}

Prompt resolve_initial_prompt(const RunConfig& config, const TaskSpec& task) {
  switch (config.initial) {
    case InitialPromptSource::default_prompt:
      return make_root_prompt(task.default_prompt, Provenance::default_prompt);
    case InitialPromptSource::expert:
      if (!task.has_expert_prompt())
        throw Error(ErrorKind::missing_expert_prompt,
                    "task " + task.name + " has no expert prompt");
      return make_root_prompt(task.expert_prompt, Provenance::expert);
    case InitialPromptSource::file:
      return make_root_prompt(read_file(config.initial_prompt_file), Provenance::expert);
  }
  throw Error(ErrorKind::config, "bad initial prompt source");
}

}  // namespace

SeedOutcome run_single_seed(const RunConfig& config, const TaskSpec& task,
                            uint64_t seed, const std::string& seed_dir,
                            const RunHooks& hooks) {
  SeedOutcome outcome;
  outcome.seed = seed;

  fs::create_directories(seed_dir);
  SeedArtifacts art = artifacts_for(seed_dir);
  fs::create_directories(art.evals_dir);

  nlohmann::json checkpoint;
  bool resuming = hooks.resume && fs::exists(art.checkpoint_path);
  if (resuming) {
    checkpoint = parse_json_file(art.checkpoint_path);
  } else {
    // Fresh run: clear artifacts a previous run of this seed left behind.
    for (const std::string& p :
         {art.trace_path, art.checkpoint_path, art.fixture_path, art.ledger_path}) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    std::error_code ec;
    fs::remove_all(art.evals_dir, ec);
    fs::create_directories(art.evals_dir);
  }

  try {
    const bool record = config.record && config.target.kind != BackendKind::replay_fixture;
    std::unique_ptr<Gateway> gateway =
        make_gateway(config.target, config.optimizer, record ? art.fixture_path : "");

    TemplateSet templates = config.templates_dir.empty()
                                ? TemplateSet::builtin()
                                : TemplateSet::load_dir(config.templates_dir);

    Evaluator evaluator(task, *gateway, config.gen);
    evaluator.on_fresh_report = [&](const EvaluationReport& report) {
      if (report.records.empty()) return;
      nlohmann::json recs = nlohmann::json::array();
      for (const auto& r : report.records) recs.push_back(r.to_json());
      nlohmann::json j = report.summary_json();
      j["records"] = recs;
      write_file(art.evals_dir + "/" + report.split + "_" + report.prompt_id + ".json",
                 j.dump(2) + "\n");
    };

    Prompt initial = resolve_initial_prompt(config, task);

    SearchState state;
    size_t trace_lines = 0;
    if (resuming) {
      state = SearchState::from_json(checkpoint.at("state"));
      evaluator.restore_cache(checkpoint.at("evaluator_cache"));
      gateway->restore_ledger(CallLedger::from_json(checkpoint.at("ledger")));
      trace_lines = checkpoint.at("trace_lines").get<size_t>();
      // A crash between the trace write and the checkpoint write can leave
      // one extra line; cut the trace back to the checkpointed prefix.
      std::vector<std::string> lines = read_lines(art.trace_path);
      if (lines.size() < trace_lines)
        throw Error(ErrorKind::checkpoint,
                    "trace shorter than checkpoint expects: " + art.trace_path);
      lines.resize(trace_lines);
      std::string joined;
      for (const auto& l : lines) joined += l + "\n";
      write_file(art.trace_path, joined);
    }

    std::ofstream trace_out(art.trace_path, std::ios::app);
    if (!trace_out) throw Error(ErrorKind::io, "cannot open trace: " + art.trace_path);

    EngineHandles handles{task,
                          *gateway,
                          evaluator,
                          templates,
                          initial,
                          config.schedule,
                          config.diversification,
                          config.update,
                          config.gen,
                          seed,
                          {},
                          {},
                          hooks.should_halt};
    handles.trace_sink = [&](const nlohmann::json& record) {
      trace_out << record.dump() << "\n";
      trace_out.flush();
      if (!trace_out) throw Error(ErrorKind::io, "trace write failed: " + art.trace_path);
      ++trace_lines;
    };
    handles.checkpoint_sink = [&](const SearchState& s) {
      nlohmann::json cp{{"version", 1},
                        {"seed", seed},
                        {"state", s.to_json()},
                        {"evaluator_cache", evaluator.cache_to_json()},
                        {"ledger", gateway->ledger_snapshot().to_json()},
                        {"trace_lines", trace_lines}};
      write_file_atomic(art.checkpoint_path, cp.dump() + "\n");
    };

    // Initial accuracies before any optimization. On resume these are cache
    // hits and cost nothing.
    outcome.initial_validation = evaluator.evaluate(initial, "validation").accuracy;
    outcome.initial_test = evaluator.evaluate(initial, "test").accuracy;
    if (config.mode == RunMode::migrate &&
        config.initial != InitialPromptSource::default_prompt) {
      Prompt default_prompt =
          make_root_prompt(task.default_prompt, Provenance::default_prompt);
      outcome.default_initial_validation =
          evaluator.evaluate(default_prompt, "validation").accuracy;
      outcome.default_initial_test = evaluator.evaluate(default_prompt, "test").accuracy;
    }

    SearchResult result =
        run_search(config.search, handles, resuming ? &state : nullptr);

    outcome.final_validation = result.best_validation;
    outcome.final_test = evaluator.evaluate(result.best, "test").accuracy;
    outcome.best_prompt_id = result.best.id;
    outcome.best_prompt_text = result.best.text;
    outcome.iterations = result.state.iteration;
    outcome.done_reason = result.state.done
                              ? result.state.done_reason
                              : (result.state.iteration >= config.search.max_iterations
                                     ? "max_iterations"
                                     : "halted");
    CallLedger ledger = gateway->ledger_snapshot();
    outcome.total_samples = ledger.total_samples();
    outcome.total_requests = ledger.total_requests();
    write_file(art.ledger_path, ledger.to_json().dump(2) + "\n");

    trace_out.close();
    outcome.transcript_hash = transcript_hash_of_file(art.trace_path);
  } catch (const std::exception& e) {
    outcome.failed = true;
    outcome.error = e.what();
  }
  return outcome;
}

namespace {

std::string render_run_report_text(const RunReport& report) {
  std::ostringstream out;
  out << "run: " << report.label << "  (mode " << to_string(report.mode) << ", task "
      << report.task_name;
  if (!report.preset.empty()) out << ", preset " << report.preset;
  out << ")\n";
  out << std::left << std::setw(8) << "seed" << std::setw(12) << "init val"
      << std::setw(12) << "init test" << std::setw(12) << "final val" << std::setw(12)
      << "final test" << std::setw(8) << "iters" << std::setw(10) << "samples"
      << "transcript\n";
  for (const auto& s : report.seeds) {
    if (s.failed) {
      out << std::left << std::setw(8) << s.seed << "FAILED: " << s.error << "\n";
      continue;
    }
    out << std::left << std::setw(8) << s.seed << std::setw(12)
        << fmt_acc(s.initial_validation) << std::setw(12) << fmt_acc(s.initial_test)
        << std::setw(12) << fmt_acc(s.final_validation) << std::setw(12)
        << fmt_acc(s.final_test) << std::setw(8) << s.iterations << std::setw(10)
        << s.total_samples << s.transcript_hash << "\n";
  }
  auto val = report.validation_series();
  auto test = report.test_series();
  if (!val.empty()) {
    out << "final validation: " << fmt_mean_std(loose_mean_std(val)) << "\n";
    out << "final test:       " << fmt_mean_std(loose_mean_std(test)) << "\n";
  }
  out << "total samples: " << report.total_samples() << "\n";

  const SeedOutcome* best = nullptr;
  for (const auto& s : report.seeds)
    if (!s.failed && (best == nullptr || s.final_validation > best->final_validation))
      best = &s;
  if (best != nullptr)
    out << "best prompt (seed " << best->seed << "):\n" << best->best_prompt_text << "\n";
  return out.str();
}

}  // namespace

RunReport run_experiment(const RunConfig& config, const RunHooks& hooks) {
  config.validate();

  RunConfig echoed = config;
  if (echoed.world_task_file.empty() &&
      echoed.target.kind == BackendKind::synthetic_world)
    echoed.world_task_file = echoed.target.world_file;

  TaskSpec task = load_run_task(echoed);

  fs::create_directories(config.out_dir);
  write_file(config.out_dir + "/config.json", echoed.to_json().dump(2) + "\n");

  RunReport report;
  report.label = config.label.empty() ? to_string(config.mode) : config.label;
  report.mode = config.mode;
  report.task_name = task.name;
  report.preset = config.preset;

  for (uint64_t seed : config.seeds) {
    SeedOutcome outcome =
        run_single_seed(echoed, task, seed, seed_dir_for(config.out_dir, seed), hooks);
    if (outcome.failed) report.partial = true;
    report.seeds.push_back(std::move(outcome));
  }

  write_file(config.out_dir + "/report.json", report.to_json().dump(2) + "\n");
  write_file(config.out_dir + "/report.txt", render_run_report_text(report));
  return report;
}

RunReport cmd_optimize(RunConfig config, const RunHooks& hooks) {
  config.mode = RunMode::optimize;
  return run_experiment(config, hooks);
}

RunReport cmd_migrate(RunConfig config, const RunHooks& hooks) {
  config.mode = RunMode::migrate;
  if (config.initial == InitialPromptSource::default_prompt)
    config.initial = InitialPromptSource::expert;
  return run_experiment(config, hooks);
}

nlohmann::json cmd_ablate(const RunConfig& base, SweepKind sweep,
                          const std::vector<int>& values) {
  if (values.empty()) throw Error(ErrorKind::config, "ablation sweep needs values");

  fs::create_directories(base.out_dir);

  RunConfig ref = base;
  if (sweep == SweepKind::pr_depth) {
    ref.schedule.positive_enabled = false;
    ref.label = "no_pr";
    ref.out_dir = base.out_dir + "/no_pr";
  } else {
    ref.diversification.k = 1;
    ref.label = "k_1";
    ref.out_dir = base.out_dir + "/k_1";
  }
  ref.preset = "";
  RunReport ref_report = run_experiment(ref);
  MeanStd ref_ms = loose_mean_std(ref_report.test_series());

  nlohmann::json points = nlohmann::json::array();
  std::ostringstream csv;
  csv << "value,mean_test,std_test,delta_vs_reference\n";
  csv << "reference," << fmt_acc(ref_ms.mean) << "," << fmt_acc(ref_ms.std) << ",0.0000\n";

  for (int v : values) {
    RunConfig rc = base;
    rc.preset = "";
    std::string tag;
    if (sweep == SweepKind::pr_depth) {
      if (v < 0) throw Error(ErrorKind::config, "pr_depth values must be >= 0");
      rc.schedule.positive_enabled = true;
      rc.schedule.positive_start_depth = v;
      tag = "pr_depth_" + std::to_string(v);
    } else {
      if (v < 1) throw Error(ErrorKind::config, "diversify_k values must be >= 1");
      rc.diversification.k = v;
      tag = "k_" + std::to_string(v);
    }
    rc.label = tag;
    rc.out_dir = base.out_dir + "/" + tag;
    RunReport rr = run_experiment(rc);
    MeanStd ms = loose_mean_std(rr.test_series());
    double delta = ms.mean - ref_ms.mean;
    points.push_back({{"value", v},
                      {"mean_test", ms.mean},
                      {"std_test", ms.std},
                      {"n", ms.n},
                      {"delta_vs_reference", delta},
                      {"dir", rc.out_dir}});
    csv << v << "," << fmt_acc(ms.mean) << "," << fmt_acc(ms.std) << ","
        << fmt_acc(delta) << "\n";
  }

  nlohmann::json sweep_report{
      {"sweep", to_string(sweep)},
      {"budget_iterations", base.search.max_iterations},
      {"reference",
       {{"mean_test", ref_ms.mean}, {"std_test", ref_ms.std}, {"dir", ref.out_dir}}},
      {"points", points}};
  write_file(base.out_dir + "/sweep_report.json", sweep_report.dump(2) + "\n");
  write_file(base.out_dir + "/plot_data.csv", csv.str());
  return sweep_report;
}

namespace {

void verify_report_against_traces(const std::string& dir, const RunReport& report,
                                  std::vector<std::string>& problems) {
  for (const auto& outcome : report.seeds) {
    if (outcome.failed) continue;
    std::string trace_path = seed_dir_for(dir, outcome.seed) + "/trace.jsonl";
    std::vector<std::string> lines;
    try {
      lines = read_lines(trace_path);
    } catch (const Error& e) {
      problems.push_back(e.what());
      continue;
    }
    if (lines.empty()) {
      problems.push_back(trace_path + ": empty trace");
      continue;
    }
    double prev_best = -1.0;
    int last_iteration = -1;
    double last_best = -1.0;
    bool ok = true;
    for (size_t i = 0; i < lines.size(); ++i) {
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(lines[i]);
      } catch (const nlohmann::json::exception& e) {
        problems.push_back(trace_path + " line " + std::to_string(i + 1) + ": " + e.what());
        ok = false;
        break;
      }
      double best = rec.at("best").at("val_accuracy").get<double>();
      if (best < prev_best) {
        problems.push_back(trace_path + " line " + std::to_string(i + 1) +
                           ": best-so-far decreased");
        ok = false;
        break;
      }
      prev_best = best;
      last_iteration = rec.at("iteration").get<int>();
      last_best = best;
    }
    if (!ok) continue;
    if (last_iteration != outcome.iterations)
      problems.push_back(trace_path + ": trace ends at iteration " +
                         std::to_string(last_iteration) + ", report says " +
                         std::to_string(outcome.iterations));
    if (last_best != outcome.final_validation)
      problems.push_back(trace_path + ": trace best " + fmt_acc(last_best) +
                         " != report final validation " +
                         fmt_acc(outcome.final_validation));
    std::string hash = transcript_hash_of_file(trace_path);
    if (hash != outcome.transcript_hash)
      problems.push_back(trace_path + ": transcript hash mismatch");
  }
}

}  // namespace

ReportTable cmd_report(const std::vector<std::string>& run_dirs, bool verify) {
  if (run_dirs.empty()) throw Error(ErrorKind::config, "report needs run directories");

  std::vector<RunReport> reports;
  for (const auto& dir : run_dirs)
    reports.push_back(RunReport::from_json(parse_json_file(dir + "/report.json")));

  std::vector<std::string> problems;
  if (verify)
    for (size_t i = 0; i < reports.size(); ++i)
      verify_report_against_traces(run_dirs[i], reports[i], problems);

  const RunReport& baseline = reports[0];
  int64_t base_samples = baseline.total_samples();

  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream text;
  text << std::left << std::setw(16) << "method" << std::setw(20) << "final val"
       << std::setw(20) << "final test" << std::setw(12) << "p" << std::setw(10) << "d"
       << std::setw(12) << "samples" << "delta samples\n";

  for (size_t i = 0; i < reports.size(); ++i) {
    const RunReport& r = reports[i];
    MeanStd val = loose_mean_std(r.validation_series());
    MeanStd test = loose_mean_std(r.test_series());
    int64_t samples = r.total_samples();

    nlohmann::json row{{"label", r.label},
                       {"task", r.task_name},
                       {"preset", r.preset},
                       {"validation", {{"mean", val.mean}, {"std", val.std}, {"n", val.n}}},
                       {"test", {{"mean", test.mean}, {"std", test.std}, {"n", test.n}}},
                       {"samples", samples},
                       {"partial", r.partial}};

    std::string p_text = "-";
    std::string d_text = "-";
    std::string delta_text = "-";
    if (i > 0) {
      bool aligned = r.seed_ids() == baseline.seed_ids() && r.seed_ids().size() >= 2;
      row["seed_aligned"] = aligned;
      if (aligned) {
        SeedSeries a{baseline.label, baseline.test_series()};
        SeedSeries b{r.label, r.test_series()};
        try {
          PairedTestResult tr = paired_t_test(a, b);
          double d = cohens_d_paired(a, b);
          row["vs_baseline"] = {{"t", tr.t}, {"p", tr.p}, {"dof", tr.dof}, {"d", d}};
          p_text = format_p(tr.p);
          char dbuf[32];
          std::snprintf(dbuf, sizeof(dbuf), "%.3f", d);
          d_text = dbuf;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::degenerate_differences) throw;
          row["vs_baseline"] = {{"degenerate", true}};
          p_text = "degenerate";
          d_text = "n/a";
        }
      }
      if (base_samples > 0) {
        double pct = 100.0 * (static_cast<double>(samples) - static_cast<double>(base_samples)) /
                     static_cast<double>(base_samples);
        row["samples_delta_pct"] = pct;
        delta_text = fmt_signed_percent(pct);
      }
    }

    rows.push_back(row);
    text << std::left << std::setw(16) << r.label << std::setw(20) << fmt_mean_std(val)
         << std::setw(20) << fmt_mean_std(test) << std::setw(12) << p_text
         << std::setw(10) << d_text << std::setw(12) << samples << delta_text << "\n";
  }
  text << "\np: two-tailed paired t-test vs " << baseline.label
       << "; d: Cohen's d on paired per-seed differences (not pooled-std).\n";

  if (!problems.empty()) {
    std::string joined = "report verification failed:";
    for (const auto& p : problems) joined += "\n  " + p;
    throw Error(ErrorKind::io, joined);
  }

  ReportTable table;
  table.text = text.str();
  table.data = {{"baseline", baseline.label}, {"rows", rows}};
  if (verify) table.data["verified"] = true;
  return table;
}

ReplayOutcome cmd_replay(const std::string& run_dir) {
  RunConfig original = RunConfig::from_json(parse_json_file(run_dir + "/config.json"));

  std::string scratch = run_dir + "/replay";
  std::error_code ec;
  fs::remove_all(scratch, ec);

  ReplayOutcome outcome;
  outcome.verified = true;
  nlohmann::json seeds_json = nlohmann::json::array();

  TaskSpec task = load_run_task(original);

  for (uint64_t seed : original.seeds) {
    std::string orig_seed_dir = seed_dir_for(run_dir, seed);
    std::string fixture = orig_seed_dir + "/fixture.jsonl";
    std::string orig_trace = orig_seed_dir + "/trace.jsonl";
    if (!fs::exists(fixture)) {
      outcome.verified = false;
      seeds_json.push_back({{"seed", seed}, {"status", "no fixture recorded"}});
      continue;
    }

    RunConfig rc = original;
    rc.target = BackendDescriptor{};
    rc.target.kind = BackendKind::replay_fixture;
    rc.target.fixture_path = fixture;
    rc.optimizer.reset();
    rc.record = false;

    std::string replay_dir = scratch + "/seed_" + std::to_string(seed);
    SeedOutcome replayed = run_single_seed(rc, task, seed, replay_dir, {});

    nlohmann::json entry{{"seed", seed}};
    if (replayed.failed) {
      outcome.verified = false;
      entry["status"] = "replay failed";
      entry["error"] = replayed.error;
      seeds_json.push_back(entry);
      continue;
    }

    std::string orig_hash = transcript_hash_of_file(orig_trace);
    entry["original_hash"] = orig_hash;
    entry["replay_hash"] = replayed.transcript_hash;
    if (replayed.transcript_hash == orig_hash) {
      entry["status"] = "verified";
    } else {
      outcome.verified = false;
      entry["status"] = "mismatch";
      std::vector<std::string> a = read_lines(orig_trace);
      std::vector<std::string> b = read_lines(replay_dir + "/trace.jsonl");
      size_t n = std::min(a.size(), b.size());
      size_t diverge = n;
      for (size_t i = 0; i < n; ++i)
        if (a[i] != b[i]) {
          diverge = i;
          break;
        }
      std::string detail;
      if (diverge < n)
        detail = "first divergence at line " + std::to_string(diverge + 1);
      else
        detail = "traces differ in length: " + std::to_string(a.size()) + " vs " +
                 std::to_string(b.size()) + " lines";
      entry["detail"] = detail;
      if (outcome.detail.empty())
        outcome.detail = "seed " + std::to_string(seed) + ": " + detail;
    }
    seeds_json.push_back(entry);
  }

  outcome.data = {{"run_dir", run_dir},
                  {"verified", outcome.verified},
                  {"seeds", seeds_json}};
  return outcome;
}

nlohmann::json cmd_evaluate(const RunConfig& config, const std::string& split_name) {
  TaskSpec task = load_run_task(config);
  std::unique_ptr<Gateway> gateway = make_gateway(config.target, config.optimizer, "");
  Evaluator evaluator(task, *gateway, config.gen);
  Prompt prompt = resolve_initial_prompt(config, task);
  const EvaluationReport& report = evaluator.evaluate(prompt, split_name);
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : report.records) records.push_back(r.to_json());
  return {{"task", task.name},
          {"split", split_name},
          {"prompt_id", report.prompt_id},
          {"prompt_text", prompt.text},
          {"accuracy", report.accuracy},
          {"n", report.n},
          {"records", records},
          {"ledger", gateway->ledger_snapshot().to_json()}};
}

}  // namespace bread
