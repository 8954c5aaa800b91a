#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bread/config.hpp"
#include "bread/errors.hpp"
#include "bread/runner.hpp"
#include "bread/world.hpp"

namespace {

using bread::BackendDescriptor;
using bread::BackendKind;
using bread::RunConfig;

std::vector<uint64_t> parse_seeds(const std::string& text) {
  std::vector<uint64_t> seeds;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t comma = text.find(',', pos);
    std::string token = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    pos = comma == std::string::npos ? text.size() : comma + 1;
    if (token.empty()) continue;
    size_t range = token.find("..");
    if (range == std::string::npos) {
      seeds.push_back(std::stoull(token));
    } else {
      uint64_t lo = std::stoull(token.substr(0, range));
      uint64_t hi = std::stoull(token.substr(range + 2));
      if (hi < lo) throw bread::Error(bread::ErrorKind::config, "bad seed range: " + token);
      for (uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    }
  }
  if (seeds.empty()) throw bread::Error(bread::ErrorKind::config, "no seeds in: " + text);
  return seeds;
}

std::vector<int> parse_sweep_values(const std::string& text) {
  std::vector<int> values;
  for (uint64_t v : parse_seeds(text)) values.push_back(static_cast<int>(v));
  return values;
}

/// --backend grammar: world=<file> | fixture=<file> | http=<endpoint>#<model>
BackendDescriptor parse_backend(const std::string& text) {
  size_t eq = text.find('=');
  if (eq == std::string::npos)
    throw bread::Error(bread::ErrorKind::config,
                       "backend must look like world=..., fixture=... or http=...: " + text);
  std::string kind = text.substr(0, eq);
  std::string rest = text.substr(eq + 1);
  BackendDescriptor b;
  if (kind == "world") {
    b.kind = BackendKind::synthetic_world;
    b.world_file = rest;
  } else if (kind == "fixture" || kind == "replay") {
    b.kind = BackendKind::replay_fixture;
    b.fixture_path = rest;
  } else if (kind == "http") {
    b.kind = BackendKind::http_openai_compatible;
    size_t hash = rest.find('#');
    if (hash == std::string::npos)
      throw bread::Error(bread::ErrorKind::config,
                         "http backend needs endpoint#model: " + rest);
    b.endpoint = rest.substr(0, hash);
    b.model = rest.substr(hash + 1);
  } else {
    throw bread::Error(bread::ErrorKind::config, "unknown backend kind: " + kind);
  }
  return b;
}

/// Flags shared by the run-producing subcommands.
struct RunFlags {
  std::string config_file;
  std::string task;
  std::string seeds;
  std::string backend;
  std::string optimizer_backend;
  std::string preset;
  int pr_depth = -1;
  int diversify_k = 0;
  int iterations = 0;
  std::string out;
  std::string strategy;
  int batch_size = 0;
  std::string initial;
  std::string initial_file;
  std::string label;
  std::string templates_dir;
  bool no_record = false;
  bool resume = false;

  bool iterations_given = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config_file, "config file (TOML-like, see README)");
  cmd->add_option("--task", f.task, "task manifest JSON");
  cmd->add_option("--seeds", f.seeds, "seed list, e.g. 1,2,3 or 1..5");
  cmd->add_option("--backend", f.backend,
                  "target backend: world=<file> | fixture=<file> | http=<endpoint>#<model>");
  cmd->add_option("--optimizer-backend", f.optimizer_backend,
                  "optimizer-side backend (defaults to the target)");
  cmd->add_option("--preset", f.preset,
                  "method preset: baseline | baseline+fd | baseline+pr | bread");
  cmd->add_option("--pr-depth", f.pr_depth, "positive reinforcement start depth");
  cmd->add_option("--diversify-k", f.diversify_k, "feedback diversification samples");
  cmd->add_option("--iterations", f.iterations, "search iteration budget")
      ->each([&f](const std::string&) { f.iterations_given = true; });
  cmd->add_option("--out", f.out, "run output directory");
  cmd->add_option("--strategy", f.strategy, "search strategy: mcts | beam | greedy");
  cmd->add_option("--batch-size", f.batch_size, "minibatch size per expansion");
  cmd->add_option("--initial", f.initial, "initial prompt source: default | expert | file");
  cmd->add_option("--initial-file", f.initial_file, "initial prompt text file");
  cmd->add_option("--label", f.label, "method label used in reports");
  cmd->add_option("--templates", f.templates_dir, "directory with template overrides");
  cmd->add_flag("--no-record", f.no_record, "skip writing per-seed fixture files");
  cmd->add_flag("--resume", f.resume, "resume seeds from their checkpoints");
}

RunConfig build_run_config(const RunFlags& f, bread::RunMode mode) {
  bread::ConfigDoc doc = f.config_file.empty()
                             ? bread::ConfigDoc::parse_string("")
                             : bread::ConfigDoc::parse_file(f.config_file);
  RunConfig c = bread::run_config_from_doc(doc, mode, f.preset);

  if (!f.task.empty()) c.task_manifest = f.task;
  if (!f.seeds.empty()) c.seeds = parse_seeds(f.seeds);
  if (!f.backend.empty()) c.target = parse_backend(f.backend);
  if (!f.optimizer_backend.empty()) c.optimizer = parse_backend(f.optimizer_backend);
  if (f.pr_depth >= 0) c.schedule.positive_start_depth = f.pr_depth;
  if (f.diversify_k > 0) c.diversification.k = f.diversify_k;
  if (f.iterations_given) c.search.max_iterations = f.iterations;
  if (!f.out.empty()) c.out_dir = f.out;
  if (!f.strategy.empty()) c.search.strategy = bread::strategy_from_string(f.strategy);
  if (f.batch_size > 0) c.search.batch_size = f.batch_size;
  if (!f.initial.empty()) c.initial = bread::initial_source_from_string(f.initial);
  if (!f.initial_file.empty()) {
    c.initial_prompt_file = f.initial_file;
    c.initial = bread::InitialPromptSource::file;
  }
  if (!f.label.empty()) c.label = f.label;
  if (!f.templates_dir.empty()) c.templates_dir = f.templates_dir;
  if (f.no_record) c.record = false;
  return c;
}

int finish_run(const bread::RunReport& report, const RunConfig& config) {
  std::cout << "wrote " << config.out_dir << "/report.{json,txt}\n";
  for (const auto& s : report.seeds) {
    if (s.failed)
      std::cout << "seed " << s.seed << ": FAILED (" << s.error << ")\n";
    else
      std::cout << "seed " << s.seed << ": final val " << s.final_validation
                << ", final test " << s.final_test << ", " << s.iterations
                << " iterations\n";
  }
  return report.partial ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bread: balanced-reinforcement prompt optimization"};
  app.require_subcommand(1);

  RunFlags optimize_flags, migrate_flags, ablate_flags, evaluate_flags;

  CLI::App* optimize = app.add_subcommand("optimize", "optimize a prompt from scratch");
  add_run_flags(optimize, optimize_flags);

  CLI::App* migrate =
      app.add_subcommand("migrate", "continual optimization from an expert prompt");
  add_run_flags(migrate, migrate_flags);

  CLI::App* ablate = app.add_subcommand("ablate", "sweep pr depth or diversification k");
  add_run_flags(ablate, ablate_flags);
  std::string sweep_name = "pr_depth";
  std::string sweep_values;
  ablate->add_option("--sweep", sweep_name, "pr_depth | diversify_k");
  ablate->add_option("--values", sweep_values, "sweep values, e.g. 0..8 or 2,4,6")
      ->required();

  CLI::App* evaluate = app.add_subcommand("evaluate", "score one prompt on one split");
  add_run_flags(evaluate, evaluate_flags);
  std::string eval_split = "validation";
  evaluate->add_option("--split", eval_split, "train | validation | test");

  CLI::App* report = app.add_subcommand("report", "compare finished runs");
  std::vector<std::string> report_dirs;
  bool report_verify = false;
  report->add_option("dirs", report_dirs, "run directories; first is the baseline")
      ->required();
  report->add_flag("--verify", report_verify, "recompute aggregates from traces");

  CLI::App* replay = app.add_subcommand("replay", "re-run a recorded run from fixtures");
  std::string replay_dir;
  replay->add_option("dir", replay_dir, "run directory with config.json")->required();

  CLI::App* worldgen = app.add_subcommand("worldgen", "write a built-in synthetic world");
  std::string world_name = "convergence";
  std::string world_out;
  uint64_t world_seed = 0;
  worldgen->add_option("--name", world_name, "convergence | migration | noisy");
  worldgen->add_option("--out", world_out, "output JSON path")->required();
  worldgen->add_option("--seed", world_seed, "world seed override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (optimize->parsed()) {
      RunConfig c = build_run_config(optimize_flags, bread::RunMode::optimize);
      bread::RunHooks hooks;
      hooks.resume = optimize_flags.resume;
      return finish_run(bread::cmd_optimize(c, hooks), c);
    }
    if (migrate->parsed()) {
      RunConfig c = build_run_config(migrate_flags, bread::RunMode::migrate);
      bread::RunHooks hooks;
      hooks.resume = migrate_flags.resume;
      return finish_run(bread::cmd_migrate(c, hooks), c);
    }
    if (ablate->parsed()) {
      RunConfig c = build_run_config(ablate_flags, bread::RunMode::optimize);
      if (!ablate_flags.iterations_given &&
          (ablate_flags.config_file.empty() ||
           !bread::ConfigDoc::parse_file(ablate_flags.config_file).has("search.iterations")))
        c.search.max_iterations = 8;
      bread::SweepKind sweep = sweep_name == "diversify_k" ? bread::SweepKind::diversify_k
                                                           : bread::SweepKind::pr_depth;
      if (sweep_name != "diversify_k" && sweep_name != "pr_depth")
        throw bread::Error(bread::ErrorKind::config, "unknown sweep: " + sweep_name);
      nlohmann::json out = bread::cmd_ablate(c, sweep, parse_sweep_values(sweep_values));
      std::cout << out.dump(2) << "\n";
      return 0;
    }
    if (evaluate->parsed()) {
      RunConfig c = build_run_config(evaluate_flags, bread::RunMode::optimize);
      if (c.out_dir.empty()) c.out_dir = ".";  // evaluate writes no run dir
      nlohmann::json result = bread::cmd_evaluate(c, eval_split);
      std::cout << result.dump(2) << "\n";
      return 0;
    }
    if (report->parsed()) {
      bread::ReportTable table = bread::cmd_report(report_dirs, report_verify);
      std::cout << table.text;
      return 0;
    }
    if (replay->parsed()) {
      bread::ReplayOutcome outcome = bread::cmd_replay(replay_dir);
      std::cout << outcome.data.dump(2) << "\n";
      if (!outcome.verified) {
        std::cout << "replay mismatch: " << outcome.detail << "\n";
        return 2;
      }
      std::cout << "replay verified\n";
      return 0;
    }
    if (worldgen->parsed()) {
      bread::TokenWorld world;
      if (world_name == "convergence")
        world = world_seed ? bread::make_convergence_world(world_seed)
                           : bread::make_convergence_world();
      else if (world_name == "migration")
        world = world_seed ? bread::make_migration_world(world_seed)
                           : bread::make_migration_world();
      else if (world_name == "noisy")
        world = world_seed ? bread::make_noisy_world(world_seed)
                           : bread::make_noisy_world();
      else
        throw bread::Error(bread::ErrorKind::config, "unknown world: " + world_name);
      world.save(world_out);
      std::cout << "wrote " << world_out << "\n";
      return 0;
    }
  } catch (const bread::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
