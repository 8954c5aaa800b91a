#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bread/errors.hpp"
#include "bread/hash.hpp"
#include "bread/runner.hpp"
#include "bread/world.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace bread;
namespace fs = std::filesystem;

namespace {

std::string conv_world() { return bread_test::asset_path("worlds/convergence.json"); }
std::string mig_world() { return bread_test::asset_path("worlds/migration.json"); }

RunConfig world_config(const std::string& world_file, const std::string& out) {
  RunConfig c;
  c.label = "demo";
  c.target.kind = BackendKind::synthetic_world;
  c.target.world_file = world_file;
  c.search.strategy = Strategy::greedy;
  c.search.max_iterations = 12;
  c.search.batch_size = 5;
  c.seeds = {1, 2};
  c.out_dir = out;
  return c;
}

nlohmann::json json_file(const std::string& path) {
  return nlohmann::json::parse(bread_test::read_file(path));
}

void write_fake_report(const std::string& dir, const std::string& label,
                       const std::vector<uint64_t>& seeds,
                       const std::vector<double>& test, int64_t samples_per_seed) {
  RunReport r;
  r.label = label;
  r.task_name = "synthetic";
  for (size_t i = 0; i < seeds.size(); ++i) {
    SeedOutcome o;
    o.seed = seeds[i];
    o.initial_validation = 0.1;
    o.initial_test = 0.1;
    o.final_validation = test[i];
    o.final_test = test[i];
    o.best_prompt_id = "p" + std::to_string(i);
    o.best_prompt_text = "text";
    o.iterations = 3;
    o.done_reason = "max_iterations";
    o.total_samples = samples_per_seed;
    o.total_requests = samples_per_seed;
    o.transcript_hash = "0000000000000000";
    r.seeds.push_back(o);
  }
  fs::create_directories(dir);
  bread_test::write_file(dir + "/report.json", r.to_json().dump(2) + "\n");
}

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("mode and source strings round-trip") {
  CHECK(run_mode_from_string("optimize") == RunMode::optimize);
  CHECK(run_mode_from_string("migrate") == RunMode::migrate);
  CHECK(std::string(to_string(RunMode::migrate)) == "migrate");
  CHECK_THROWS_AS(run_mode_from_string("tune"), Error);

  CHECK(initial_source_from_string("default") == InitialPromptSource::default_prompt);
  CHECK(initial_source_from_string("expert") == InitialPromptSource::expert);
  CHECK(initial_source_from_string("file") == InitialPromptSource::file);
  CHECK_THROWS_AS(initial_source_from_string("best"), Error);

  CHECK(std::string(to_string(SweepKind::pr_depth)) == "pr_depth");
  CHECK(std::string(to_string(SweepKind::diversify_k)) == "diversify_k");
}

TEST_CASE("presets set the schedule and diversification") {
  RunConfig c;
  apply_preset(c, "baseline");
  CHECK_FALSE(c.schedule.positive_enabled);
  CHECK(c.diversification.k == 1);
  CHECK(c.preset == "baseline");

  apply_preset(c, "baseline+fd");
  CHECK_FALSE(c.schedule.positive_enabled);
  CHECK(c.diversification.k == 6);

  apply_preset(c, "baseline+pr");
  CHECK(c.schedule.positive_enabled);
  CHECK(c.diversification.k == 1);

  apply_preset(c, "bread");
  CHECK(c.schedule.positive_enabled);
  CHECK(c.diversification.k == 6);
  CHECK(c.preset == "bread");

  apply_preset(c, "");
  CHECK(c.preset == "bread");

  CHECK_THROWS_WITH_AS(apply_preset(c, "breadx"),
                       doctest::Contains("unknown preset"), Error);
}

TEST_CASE("config layering: defaults, file preset, file keys, cli preset") {
  ConfigDoc doc = ConfigDoc::parse_string(
      "preset = \"baseline\"\n"
      "[diversification]\n"
      "k = 3\n"
      "[search]\n"
      "iterations = 9\n"
      "[backend.target]\n"
      "kind = \"world\"\n"
      "world = \"w.json\"\n"
      "[run]\n"
      "seeds = [3, 4]\n"
      "out = \"out\"\n");

  RunConfig file_wins = run_config_from_doc(doc, RunMode::optimize);
  CHECK(file_wins.preset == "baseline");
  CHECK_FALSE(file_wins.schedule.positive_enabled);
  CHECK(file_wins.diversification.k == 3);
  CHECK(file_wins.search.max_iterations == 9);
  CHECK(file_wins.target.kind == BackendKind::synthetic_world);
  CHECK(file_wins.target.world_file == "w.json");
  CHECK(file_wins.seeds == std::vector<uint64_t>{3, 4});
  CHECK(file_wins.out_dir == "out");
  CHECK(file_wins.label == "baseline");

  RunConfig cli_wins = run_config_from_doc(doc, RunMode::optimize, "bread");
  CHECK(cli_wins.preset == "bread");
  CHECK(cli_wins.schedule.positive_enabled);
  CHECK(cli_wins.diversification.k == 6);
  CHECK(cli_wins.search.max_iterations == 9);
  CHECK(cli_wins.label == "bread");
}

TEST_CASE("migrate mode changes the defaults") {
  ConfigDoc empty = ConfigDoc::parse_string("");
  RunConfig c = run_config_from_doc(empty, RunMode::migrate);
  CHECK(c.mode == RunMode::migrate);
  CHECK(c.initial == InitialPromptSource::expert);
  CHECK(c.diversification.k == 2);
  CHECK(c.schedule.positive_enabled);
  CHECK(c.schedule.positive_start_depth == 0);
  CHECK(c.label == "migrate");

  ConfigDoc with_initial = ConfigDoc::parse_string("[run]\ninitial = \"file\"\n");
  RunConfig c2 = run_config_from_doc(with_initial, RunMode::migrate);
  CHECK(c2.initial == InitialPromptSource::file);
}

TEST_CASE("optimizer backend and negative seeds in the document") {
  ConfigDoc doc = ConfigDoc::parse_string(
      "[backend.target]\n"
      "kind = \"world\"\n"
      "world = \"w.json\"\n"
      "[backend.optimizer]\n"
      "kind = \"http\"\n"
      "endpoint = \"https://api.example.com/v1\"\n"
      "model = \"m\"\n"
      "auth_env = \"OTHER_KEY\"\n");
  RunConfig c = run_config_from_doc(doc, RunMode::optimize);
  REQUIRE(c.optimizer.has_value());
  CHECK(c.optimizer->kind == BackendKind::http_openai_compatible);
  CHECK(c.optimizer->auth_env == "OTHER_KEY");

  ConfigDoc bad = ConfigDoc::parse_string("[run]\nseeds = [1, -2]\n");
  CHECK_THROWS_WITH_AS(run_config_from_doc(bad, RunMode::optimize),
                       doctest::Contains("non-negative"), Error);
}

TEST_CASE("run config validation") {
  bread_test::TempDir tmp("runner_validate");
  RunConfig ok = world_config(conv_world(), tmp.file("out"));
  CHECK_NOTHROW(ok.validate());

  RunConfig bad = ok;
  bad.seeds.clear();
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("at least one seed"), Error);

  bad = ok;
  bad.seeds = {1, 2, 1};
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("distinct"), Error);

  bad = ok;
  bad.mode = RunMode::migrate;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("expert or file"), Error);

  bad = ok;
  bad.initial = InitialPromptSource::file;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("needs a path"), Error);

  bad = ok;
  bad.out_dir.clear();
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("out_dir"), Error);

  bad = ok;
  bad.target = BackendDescriptor{};
  bad.target.kind = BackendKind::http_openai_compatible;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("http backend"), Error);

  bad.target.endpoint = "https://api.example.com/v1";
  bad.target.model = "m";
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("no task"), Error);
}

TEST_CASE("run config round-trips through json") {
  RunConfig c = world_config("w.json", "out");
  c.optimizer = BackendDescriptor{};
  c.optimizer->kind = BackendKind::http_openai_compatible;
  c.optimizer->endpoint = "https://api.example.com/v1";
  c.optimizer->model = "m";
  c.initial = InitialPromptSource::file;
  c.initial_prompt_file = "prompt.txt";
  c.preset = "bread";
  c.record = false;
  c.templates_dir = "tmpl";
  c.schedule.positive_start_depth = 2;
  c.diversification.k = 4;

  nlohmann::json j = c.to_json();
  RunConfig back = RunConfig::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back.optimizer.has_value());

  j.erase("optimizer");
  RunConfig no_opt = RunConfig::from_json(j);
  CHECK_FALSE(no_opt.optimizer.has_value());
}

TEST_CASE("seed outcome round-trips through json") {
  SeedOutcome o;
  o.seed = 4;
  o.initial_validation = 0.25;
  o.initial_test = 0.5;
  o.default_initial_validation = 0.0;
  o.default_initial_test = 0.1;
  o.final_validation = 0.75;
  o.final_test = 0.7;
  o.best_prompt_id = "abc";
  o.best_prompt_text = "do this";
  o.iterations = 6;
  o.done_reason = "validation_perfect";
  o.total_samples = 123;
  o.total_requests = 40;
  o.transcript_hash = "aaaabbbbccccdddd";

  SeedOutcome back = SeedOutcome::from_json(o.to_json());
  CHECK(back.to_json() == o.to_json());
  REQUIRE(back.default_initial_validation.has_value());
  CHECK(*back.default_initial_validation == 0.0);

  SeedOutcome failed;
  failed.seed = 1;
  failed.failed = true;
  failed.error = "boom";
  SeedOutcome failed_back = SeedOutcome::from_json(failed.to_json());
  CHECK(failed_back.failed);
  CHECK(failed_back.error == "boom");
  CHECK_FALSE(failed_back.default_initial_validation.has_value());
}

TEST_CASE("load_run_task prefers the manifest, falls back to the world") {
  RunConfig c = world_config(conv_world(), "out");
  TaskSpec from_target = load_run_task(c);
  CHECK(from_target.name == "convergence");

  c.world_task_file = mig_world();
  TaskSpec from_world_file = load_run_task(c);
  CHECK(from_world_file.name == "migration");

  c.task_manifest = bread_test::asset_path("tasks/cb/task.json");
  TaskSpec from_manifest = load_run_task(c);
  CHECK(from_manifest.name == "cb");

  RunConfig none;
  none.target.kind = BackendKind::http_openai_compatible;
  CHECK_THROWS_WITH_AS(load_run_task(none), doctest::Contains("no task"), Error);
}

TEST_CASE("optimize writes the full artifact layout and converges") {
  bread_test::TempDir tmp("runner_optimize");
  RunConfig config = world_config(conv_world(), tmp.file("run"));
  RunReport report = cmd_optimize(config);

  CHECK_FALSE(report.partial);
  CHECK(report.label == "demo");
  CHECK(report.task_name == "convergence");
  REQUIRE(report.seeds.size() == 2);
  for (const auto& outcome : report.seeds) {
    CAPTURE(outcome.seed);
    REQUIRE_FALSE(outcome.failed);
    CHECK(outcome.initial_validation == 0.0);
    CHECK(outcome.final_validation == 1.0);
    CHECK(outcome.final_test == 1.0);
    CHECK(outcome.done_reason == "validation_perfect");
    CHECK(outcome.total_samples > 0);

    std::string seed_dir = tmp.file("run/seed_" + std::to_string(outcome.seed));
    for (const char* name :
         {"trace.jsonl", "checkpoint.json", "fixture.jsonl", "ledger.json"}) {
      CAPTURE(name);
      CHECK(fs::exists(seed_dir + "/" + name));
    }
    CHECK(outcome.transcript_hash ==
          transcript_hash_of_file(seed_dir + "/trace.jsonl"));

    nlohmann::json ledger = json_file(seed_dir + "/ledger.json");
    CHECK(ledger.at("total_samples").get<int64_t>() == outcome.total_samples);

    bool saw_validation_eval = false;
    for (const auto& entry : fs::directory_iterator(seed_dir + "/evals")) {
      if (entry.path().filename().string().rfind("validation_", 0) == 0)
        saw_validation_eval = true;
    }
    CHECK(saw_validation_eval);
  }

  RunReport from_disk = RunReport::from_json(json_file(tmp.file("run/report.json")));
  CHECK(from_disk.label == "demo");
  CHECK(from_disk.validation_series() == std::vector<double>{1.0, 1.0});
  nlohmann::json report_json = json_file(tmp.file("run/report.json"));
  CHECK(report_json.at("aggregate").at("validation").at("mean").get<double>() == 1.0);

  std::string text = bread_test::read_file(tmp.file("run/report.txt"));
  CHECK(text.find("final validation: 1.0000") != std::string::npos);
  CHECK(text.find("best prompt (seed") != std::string::npos);

  RunConfig echoed = RunConfig::from_json(json_file(tmp.file("run/config.json")));
  CHECK(echoed.world_task_file == conv_world());
}

TEST_CASE("halting and resuming reproduces the straight transcript") {
  bread_test::TempDir tmp("runner_resume");
  // The migration world never reaches validation 1.0, so the run spans
  // enough iterations to make the halt boundary meaningful.
  RunConfig straight_cfg = world_config(mig_world(), tmp.file("straight"));
  straight_cfg.seeds = {1};
  RunReport straight = cmd_optimize(straight_cfg);
  REQUIRE_FALSE(straight.seeds[0].failed);
  REQUIRE(straight.seeds[0].iterations > 3);

  RunConfig halted_cfg = straight_cfg;
  halted_cfg.out_dir = tmp.file("halted");
  RunHooks halt;
  halt.should_halt = [](int iteration) { return iteration >= 2; };
  RunReport halted = cmd_optimize(halted_cfg, halt);
  REQUIRE_FALSE(halted.seeds[0].failed);
  CHECK(halted.seeds[0].iterations == 2);
  CHECK(halted.seeds[0].done_reason == "halted");

  RunHooks resume;
  resume.resume = true;
  RunReport resumed = cmd_optimize(halted_cfg, resume);
  REQUIRE_FALSE(resumed.seeds[0].failed);
  CHECK(resumed.seeds[0].transcript_hash == straight.seeds[0].transcript_hash);
  CHECK(resumed.seeds[0].iterations == straight.seeds[0].iterations);
  CHECK(resumed.seeds[0].final_validation == straight.seeds[0].final_validation);
  CHECK(resumed.seeds[0].best_prompt_id == straight.seeds[0].best_prompt_id);
  CHECK(resumed.seeds[0].total_samples == straight.seeds[0].total_samples);

  ReplayOutcome replay = cmd_replay(halted_cfg.out_dir);
  CHECK(replay.verified);
}

TEST_CASE("replay verifies a recorded run and flags tampering") {
  bread_test::TempDir tmp("runner_replay");
  RunConfig config = world_config(conv_world(), tmp.file("run"));
  config.seeds = {1};
  cmd_optimize(config);

  ReplayOutcome ok = cmd_replay(config.out_dir);
  CHECK(ok.verified);
  REQUIRE(ok.data.at("seeds").size() == 1);
  CHECK(ok.data.at("seeds")[0].at("status") == "verified");

  std::string trace = tmp.file("run/seed_1/trace.jsonl");
  std::ofstream(trace, std::ios::app) << "{\"junk\":true}\n";
  ReplayOutcome tampered = cmd_replay(config.out_dir);
  CHECK_FALSE(tampered.verified);
  CHECK(tampered.data.at("seeds")[0].at("status") == "mismatch");
  CHECK(tampered.detail.find("seed 1") != std::string::npos);

  fs::remove(tmp.file("run/seed_1/fixture.jsonl"));
  ReplayOutcome missing = cmd_replay(config.out_dir);
  CHECK_FALSE(missing.verified);
  CHECK(missing.data.at("seeds")[0].at("status") == "no fixture recorded");
}

TEST_CASE("report compares runs against the first directory") {
  bread_test::TempDir tmp("runner_report");
  write_fake_report(tmp.file("a"), "baseline", {1, 2, 3}, {0.50, 0.60, 0.55}, 100);
  write_fake_report(tmp.file("b"), "bread", {1, 2, 3}, {0.70, 0.80, 0.78}, 150);
  write_fake_report(tmp.file("c"), "other_seeds", {7, 8}, {0.9, 0.9}, 100);
  write_fake_report(tmp.file("d"), "clone", {1, 2, 3}, {0.50, 0.60, 0.55}, 100);

  ReportTable table =
      cmd_report({tmp.file("a"), tmp.file("b"), tmp.file("c"), tmp.file("d")});
  CHECK(table.data.at("baseline") == "baseline");
  const auto& rows = table.data.at("rows");
  REQUIRE(rows.size() == 4);

  CHECK_FALSE(rows[0].contains("vs_baseline"));
  CHECK_FALSE(rows[0].contains("seed_aligned"));

  REQUIRE(rows[1].at("seed_aligned").get<bool>());
  const auto& vs = rows[1].at("vs_baseline");
  CHECK(vs.at("p").get<double>() > 0.0);
  CHECK(vs.at("p").get<double>() < 0.05);
  CHECK(vs.at("d").get<double>() > 0.0);
  CHECK(vs.at("dof").get<int>() == 2);
  CHECK(rows[1].at("samples_delta_pct").get<double>() == doctest::Approx(50.0));

  CHECK_FALSE(rows[2].at("seed_aligned").get<bool>());
  CHECK_FALSE(rows[2].contains("vs_baseline"));

  CHECK(rows[3].at("vs_baseline").at("degenerate").get<bool>());
  CHECK(table.text.find("degenerate") != std::string::npos);
  CHECK(table.text.find("+50.0%") != std::string::npos);

  ReportTable solo = cmd_report({tmp.file("a")});
  CHECK(solo.data.at("rows").size() == 1);

  CHECK_THROWS_AS(cmd_report({}), Error);
}

TEST_CASE("report verification recomputes aggregates from traces") {
  bread_test::TempDir tmp("runner_verify");
  RunConfig config = world_config(conv_world(), tmp.file("run"));
  config.seeds = {1};
  cmd_optimize(config);

  ReportTable verified = cmd_report({tmp.file("run")}, true);
  CHECK(verified.data.at("verified").get<bool>());

  std::string trace = tmp.file("run/seed_1/trace.jsonl");
  std::vector<std::string> lines;
  {
    std::ifstream in(trace);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  }
  REQUIRE(!lines.empty());
  std::ofstream(trace, std::ios::app) << lines.back() << "\n";
  CHECK_THROWS_WITH_AS(cmd_report({tmp.file("run")}, true),
                       doctest::Contains("transcript hash mismatch"), Error);
}

TEST_CASE("ablation sweeps write reference and per-value runs") {
  bread_test::TempDir tmp("runner_ablate");
  RunConfig base = world_config(conv_world(), tmp.file("sweep"));
  base.seeds = {1};
  base.search.max_iterations = 8;
  base.schedule.positive_enabled = true;
  base.schedule.positive_start_depth = 3;

  nlohmann::json sweep = cmd_ablate(base, SweepKind::pr_depth, {0, 2});
  CHECK(sweep.at("sweep") == "pr_depth");
  CHECK(sweep.at("budget_iterations").get<int>() == 8);
  CHECK(sweep.at("reference").at("dir") == tmp.file("sweep/no_pr"));
  REQUIRE(sweep.at("points").size() == 2);
  CHECK(sweep.at("points")[0].at("value").get<int>() == 0);
  CHECK(sweep.at("points")[1].at("value").get<int>() == 2);
  for (const auto& point : sweep.at("points")) {
    CHECK(point.contains("mean_test"));
    CHECK(point.contains("delta_vs_reference"));
  }

  for (const char* sub : {"no_pr", "pr_depth_0", "pr_depth_2"}) {
    CAPTURE(sub);
    CHECK(fs::exists(tmp.file(std::string("sweep/") + sub + "/report.json")));
  }
  CHECK(fs::exists(tmp.file("sweep/sweep_report.json")));
  CHECK(bread_test::count_lines(tmp.file("sweep/plot_data.csv")) == 4);
  std::string csv = bread_test::read_file(tmp.file("sweep/plot_data.csv"));
  CHECK(csv.rfind("value,mean_test,std_test,delta_vs_reference\n", 0) == 0);
  CHECK(csv.find("\nreference,") != std::string::npos);

  CHECK_THROWS_AS(cmd_ablate(base, SweepKind::pr_depth, {}), Error);
  CHECK_THROWS_AS(cmd_ablate(base, SweepKind::pr_depth, {-1}), Error);
  CHECK_THROWS_AS(cmd_ablate(base, SweepKind::diversify_k, {0}), Error);
}

TEST_CASE("migrate starts from the expert prompt and keeps the default baseline") {
  bread_test::TempDir tmp("runner_migrate");
  RunConfig config = world_config(mig_world(), tmp.file("run"));
  config.seeds = {1};
  config.search.max_iterations = 1;
  config.diversification.k = 2;
  config.schedule.positive_start_depth = 0;

  RunReport report = cmd_migrate(config);
  CHECK(report.mode == RunMode::migrate);
  REQUIRE(report.seeds.size() == 1);
  const SeedOutcome& outcome = report.seeds[0];
  REQUIRE_FALSE(outcome.failed);
  CHECK(outcome.initial_validation == 0.5);
  CHECK(outcome.initial_test == 0.5);
  REQUIRE(outcome.default_initial_validation.has_value());
  CHECK(*outcome.default_initial_validation == 0.0);

  RunReport from_disk = RunReport::from_json(json_file(tmp.file("run/report.json")));
  CHECK(from_disk.mode == RunMode::migrate);
  REQUIRE(from_disk.seeds.size() == 1);
  CHECK(from_disk.seeds[0].default_initial_validation.has_value());
}

TEST_CASE("evaluate scores the starting prompt on one split") {
  RunConfig config = world_config(conv_world(), "unused");
  nlohmann::json out = cmd_evaluate(config, "validation");
  CHECK(out.at("task") == "convergence");
  CHECK(out.at("split") == "validation");
  CHECK(out.at("accuracy").get<double>() == 0.0);
  CHECK(out.at("n").get<int>() == 10);
  CHECK(out.at("records").size() == 10);
  CHECK(out.at("ledger").at("roles").contains("evaluation"));

  CHECK_THROWS_AS(cmd_evaluate(config, "nope"), Error);
}

TEST_CASE("transcript hashes are digests of the raw trace bytes") {
  bread_test::TempDir tmp("runner_hash");
  bread_test::write_file(tmp.file("t.jsonl"), "{\"iteration\":0}\n");
  CHECK(transcript_hash_of_file(tmp.file("t.jsonl")) ==
        digest("{\"iteration\":0}\n"));
  CHECK_THROWS_AS(transcript_hash_of_file(tmp.file("missing.jsonl")), Error);
}

}  // TEST_SUITE
