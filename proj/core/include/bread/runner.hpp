#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bread/backend.hpp"
#include "bread/config.hpp"
#include "bread/search.hpp"
#include "bread/task.hpp"

namespace bread {

enum class RunMode { optimize, migrate };
const char* to_string(RunMode m);
RunMode run_mode_from_string(const std::string& s);

enum class InitialPromptSource { default_prompt, expert, file };
const char* to_string(InitialPromptSource s);
InitialPromptSource initial_source_from_string(const std::string& s);

/// One multi-seed experiment. Built from mode defaults, then a preset
/// expansion, then config file keys, then CLI flags (later layers win).
struct RunConfig {
  std::string label;            // method label in reports
  std::string task_manifest;    // task manifest path; empty when a world defines the task
  std::string world_task_file;  // world JSON doubling as the task (kept for replay)
  BackendDescriptor target;
  std::optional<BackendDescriptor> optimizer;
  SearchConfig search;
  ReinforcementSchedule schedule;
  DiversificationConfig diversification;
  UpdateConfig update;
  GenParams gen;
  std::vector<uint64_t> seeds{1, 2, 3, 4, 5};
  RunMode mode = RunMode::optimize;
  InitialPromptSource initial = InitialPromptSource::default_prompt;
  std::string initial_prompt_file;
  std::string preset;  // "", "baseline", "baseline+fd", "baseline+pr", "bread"
  std::string out_dir;
  bool record = true;            // write per-seed fixture.jsonl
  std::string templates_dir;     // optional template overrides

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

/// Expands a method preset onto schedule/diversification:
///   baseline      negative-only, k=1
///   baseline+fd   negative-only, k=6
///   baseline+pr   both polarities, k=1
///   bread         both polarities, k=6
void apply_preset(RunConfig& config, const std::string& preset);

/// Builds a RunConfig from a parsed config document. `cli_preset`, when
/// non-empty, is expanded after the file keys so it takes precedence over
/// them; individual CLI flags are applied by the caller afterwards.
RunConfig run_config_from_doc(const ConfigDoc& doc, RunMode mode,
                              const std::string& cli_preset = "");

/// Resolves the task: explicit manifest first, then the world file.
TaskSpec load_run_task(const RunConfig& config);

struct SeedOutcome {
  uint64_t seed = 0;
  bool failed = false;
  std::string error;

  double initial_validation = 0.0;  // starting prompt, before any optimization
  double initial_test = 0.0;
  std::optional<double> default_initial_validation;  // migrate mode extra
  std::optional<double> default_initial_test;

  double final_validation = 0.0;
  double final_test = 0.0;
  std::string best_prompt_id;
  std::string best_prompt_text;
  int iterations = 0;
  std::string done_reason;
  int64_t total_samples = 0;
  int64_t total_requests = 0;
  std::string transcript_hash;

  nlohmann::json to_json() const;
  static SeedOutcome from_json(const nlohmann::json& j);
};

struct RunReport {
  std::string label;
  RunMode mode = RunMode::optimize;
  std::string task_name;
  std::string preset;
  std::vector<SeedOutcome> seeds;
  bool partial = false;  // at least one seed failed

  std::vector<double> validation_series() const;  // successful seeds only
  std::vector<double> test_series() const;
  std::vector<uint64_t> seed_ids() const;
  int64_t total_samples() const;

  nlohmann::json to_json() const;
  static RunReport from_json(const nlohmann::json& j);
};

struct RunHooks {
  std::function<bool(int)> should_halt;  // forwarded to the search loop
  bool resume = false;                   // pick up from per-seed checkpoints
};

/// Runs one seed end to end in `seed_dir` (trace.jsonl, checkpoint.json,
/// fixture.jsonl, ledger.json, evals/). Failures are captured in the outcome.
SeedOutcome run_single_seed(const RunConfig& config, const TaskSpec& task,
                            uint64_t seed, const std::string& seed_dir,
                            const RunHooks& hooks = {});

/// Runs all seeds and writes config.json, report.json and report.txt under
/// config.out_dir.
RunReport run_experiment(const RunConfig& config, const RunHooks& hooks = {});

RunReport cmd_optimize(RunConfig config, const RunHooks& hooks = {});

/// Records initial accuracies of both the default and the starting prompt,
/// then optimizes from the expert (or file) prompt.
RunReport cmd_migrate(RunConfig config, const RunHooks& hooks = {});

enum class SweepKind { pr_depth, diversify_k };
const char* to_string(SweepKind s);

/// One experiment per sweep value plus a reference run (no positive
/// reinforcement for pr_depth sweeps, k=1 for diversify_k sweeps). Writes
/// sweep_report.json and plot_data.csv under base.out_dir.
nlohmann::json cmd_ablate(const RunConfig& base, SweepKind sweep,
                          const std::vector<int>& values);

struct ReportTable {
  std::string text;
  nlohmann::json data;
};

/// Cross-run comparison table: the first directory is the baseline row;
/// paired stats are computed only for seed-aligned series. With `verify`,
/// every aggregate is recomputed from the trace files and mismatches fail.
ReportTable cmd_report(const std::vector<std::string>& run_dirs, bool verify = false);

struct ReplayOutcome {
  bool verified = false;
  std::string detail;  // first divergence when not verified
  nlohmann::json data;
};

/// Re-executes a recorded run against its own fixtures and compares
/// transcript hashes per seed.
ReplayOutcome cmd_replay(const std::string& run_dir);

/// Evaluates the configured initial prompt on one split.
nlohmann::json cmd_evaluate(const RunConfig& config, const std::string& split_name);

/// Hash of a run transcript (the raw bytes of a trace file).
std::string transcript_hash_of_file(const std::string& trace_path);

}  // namespace bread
