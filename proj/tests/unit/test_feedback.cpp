#include <memory>
#include <vector>

#include "bread/errors.hpp"
#include "bread/feedback.hpp"
#include "bread/gateway.hpp"
#include "doctest.h"

using namespace bread;

namespace {

PredictionRecord rec(const std::string& id, bool correct) {
  PredictionRecord r;
  r.example_id = id;
  r.input_text = "in_" + id;
  r.gold_label = "yes";
  r.raw_output = correct ? "yes" : "no";
  r.extracted = r.raw_output;
  r.correct = correct;
  return r;
}

class FeedbackScriptBackend : public Backend {
public:
  bool identical = false;
  int empty_rounds = 0;
  std::vector<CompletionRequest> seen;

  CompletionResponse generate(const CompletionRequest& request) override {
    seen.push_back(request);
    CompletionResponse resp;
    if (request.role_tag == RoleTag::summarize) {
      resp.samples.assign(static_cast<size_t>(request.sample_count), "CONSOLIDATED");
    } else {
      int round = 0;
      for (const auto& r : seen)
        if (r.role_tag == request.role_tag) ++round;
      for (int i = 0; i < request.sample_count; ++i) {
        if (round <= empty_rounds)
          resp.samples.push_back("");
        else if (identical)
          resp.samples.push_back("SAME advice");
        else
          resp.samples.push_back("COMMON line\nUNIQUE " + std::to_string(i));
      }
    }
    resp.finish_reasons.assign(resp.samples.size(), "stop");
    samples_generated_ += static_cast<int64_t>(resp.samples.size());
    return resp;
  }
};

struct Ctx {
  std::unique_ptr<Gateway> gateway;
  FeedbackScriptBackend* backend = nullptr;
  TemplateSet templates = TemplateSet::builtin();

  explicit Ctx(int k, Aggregation agg = Aggregation::llm_summarize) {
    auto b = std::make_unique<FeedbackScriptBackend>();
    backend = b.get();
    BackendDescriptor desc;
    desc.kind = BackendKind::synthetic_world;
    desc.world_file = "mem:feedback";
    gateway = std::make_unique<Gateway>(std::move(b), desc);
    config.k = k;
    config.aggregation = agg;
  }

  DiversificationConfig config;
  FeedbackContext context() { return {*gateway, templates, config}; }
};

}  // namespace

TEST_SUITE("feedback") {

TEST_CASE("examples block renders one record per prediction") {
  std::string block = format_examples_block({rec("e1", false), rec("e2", true)}, 4000);
  CHECK(block ==
        "[example id=e1 correct=false]\ninput: in_e1\ngold: yes\ngot: no\n"
        "[example id=e2 correct=true]\ninput: in_e2\ngold: yes\ngot: yes");
}

TEST_CASE("examples block marks unparseable outputs") {
  PredictionRecord r = rec("e1", false);
  r.extracted = std::nullopt;
  std::string block = format_examples_block({r}, 4000);
  CHECK(block.find("got: <unparseable>") != std::string::npos);
}

TEST_CASE("examples block truncates at the budget but keeps one record") {
  std::vector<PredictionRecord> records{rec("e1", false), rec("e2", false),
                                        rec("e3", false)};
  std::string tiny = format_examples_block(records, 10);
  CHECK(tiny.find("e1") != std::string::npos);
  CHECK(tiny.find("e2") == std::string::npos);

  std::string two = format_examples_block(records, 130);
  CHECK(two.find("e1") != std::string::npos);
  CHECK(two.find("e2") != std::string::npos);
  CHECK(two.find("e3") == std::string::npos);
}

TEST_CASE("strict majority needs more than half") {
  auto lines = strict_majority_lines({"a\nb", "a", "a\nc"});
  CHECK(lines == std::vector<std::string>{"a"});

  CHECK(strict_majority_lines({"a", "a", "b", "b"}).empty());
  CHECK(strict_majority_lines({"a", "a", "a", "b"}) ==
        std::vector<std::string>{"a"});
}

TEST_CASE("strict majority counts each line once per text") {
  auto lines = strict_majority_lines({"x\nx\nx", "y", "z"});
  CHECK(lines.empty());
}

TEST_CASE("strict majority trims and skips placeholders") {
  auto lines = strict_majority_lines({"  a  \n\nNO CHANGES", "a\r", "a"});
  CHECK(lines == std::vector<std::string>{"a"});
  CHECK(strict_majority_lines({"NO CHANGES", "NO CHANGES"}).empty());
}

TEST_CASE("strict majority output is sorted and deduplicated") {
  auto lines = strict_majority_lines({"b\na", "a\nb", "b\na"});
  CHECK(lines == std::vector<std::string>{"a", "b"});
}

TEST_CASE("k=1 feedback takes the sample verbatim") {
  Ctx ctx(1);
  auto fctx = ctx.context();
  Prompt prompt = make_root_prompt("base", Provenance::default_prompt);
  FeedbackSignal signal =
      generate_negative_feedback(fctx, prompt, {rec("e1", false)}, "batch1");
  CHECK(signal.polarity == Polarity::negative);
  CHECK(signal.text == "COMMON line\nUNIQUE 0");
  CHECK(signal.k == 1);
  CHECK_FALSE(signal.aggregate);
  CHECK(signal.sample_ids.size() == 1);
  CHECK(signal.prompt_id == prompt.id);
  CHECK(signal.batch_id == "batch1");
  CHECK(ctx.gateway->ledger_snapshot().role(RoleTag::feedback).requests == 1);
  CHECK(ctx.gateway->ledger_snapshot().role(RoleTag::summarize).requests == 0);
}

TEST_CASE("diversified feedback aggregates via summarize") {
  Ctx ctx(4);
  auto fctx = ctx.context();
  Prompt prompt = make_root_prompt("base", Provenance::default_prompt);
  FeedbackSignal signal =
      generate_negative_feedback(fctx, prompt, {rec("e1", false)}, "b");
  CHECK(signal.aggregate);
  CHECK(signal.k == 4);
  CHECK(signal.sample_ids.size() == 4);
  CHECK(signal.text == "CONSOLIDATED");
  CHECK(ctx.gateway->ledger_snapshot().role(RoleTag::feedback).samples == 4);
  CHECK(ctx.gateway->ledger_snapshot().role(RoleTag::summarize).requests == 1);
  CHECK(ctx.gateway->ledger_snapshot().role(RoleTag::summarize).samples == 1);
}

TEST_CASE("byte-identical samples skip the summarize call") {
  Ctx ctx(5);
  ctx.backend->identical = true;
  auto fctx = ctx.context();
  Prompt prompt = make_root_prompt("base", Provenance::default_prompt);
  FeedbackSignal signal =
      generate_negative_feedback(fctx, prompt, {rec("e1", false)}, "b");
  CHECK(signal.aggregate);
  CHECK(signal.text == "SAME advice");
  CHECK(ctx.gateway->ledger_snapshot().role(RoleTag::summarize).requests == 0);
}

TEST_CASE("majority_directives aggregates without extra calls") {
  Ctx ctx(3, Aggregation::majority_directives);
  auto fctx = ctx.context();
  Prompt prompt = make_root_prompt("base", Provenance::default_prompt);
  FeedbackSignal signal =
      generate_negative_feedback(fctx, prompt, {rec("e1", false)}, "b");
  CHECK(signal.aggregate);
  // COMMON appears in every sample; each UNIQUE line only once.
  CHECK(signal.text == "COMMON line");
  CHECK(ctx.gateway->ledger_snapshot().role(RoleTag::summarize).requests == 0);
}

TEST_CASE("positive feedback uses the positive template") {
  Ctx ctx(1);
  auto fctx = ctx.context();
  Prompt prompt = make_root_prompt("base", Provenance::default_prompt);
  FeedbackSignal signal =
      generate_positive_feedback(fctx, prompt, {rec("e1", true)}, "b");
  CHECK(signal.polarity == Polarity::positive);
  REQUIRE(ctx.backend->seen.size() == 1);
  const std::string& sent = ctx.backend->seen[0].messages[0].content;
  CHECK(sent.find("answered correctly") != std::string::npos);
  CHECK(sent.find("base") != std::string::npos);
  CHECK(sent.find("[example id=e1 correct=true]") != std::string::npos);
}

TEST_CASE("an empty response is retried once with a distinct request") {
  Ctx ctx(2);
  ctx.backend->empty_rounds = 1;
  auto fctx = ctx.context();
  Prompt prompt = make_root_prompt("base", Provenance::default_prompt);
  FeedbackSignal signal =
      generate_negative_feedback(fctx, prompt, {rec("e1", false)}, "b");
  CHECK(signal.text == "CONSOLIDATED");

  std::vector<CompletionRequest> feedback_reqs;
  for (const auto& r : ctx.backend->seen)
    if (r.role_tag == RoleTag::feedback) feedback_reqs.push_back(r);
  REQUIRE(feedback_reqs.size() == 2);
  CHECK(feedback_reqs[1].messages.size() == feedback_reqs[0].messages.size() + 1);
  CHECK(request_hash(feedback_reqs[0]) != request_hash(feedback_reqs[1]));
  CHECK(ctx.gateway->ledger_snapshot().role(RoleTag::feedback).requests == 2);
}

TEST_CASE("two empty responses in a row fail") {
  Ctx ctx(2);
  ctx.backend->empty_rounds = 99;
  auto fctx = ctx.context();
  Prompt prompt = make_root_prompt("base", Provenance::default_prompt);
  try {
    generate_negative_feedback(fctx, prompt, {rec("e1", false)}, "b");
    FAIL("expected malformed_response");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::malformed_response);
  }
}

TEST_CASE("feedback with no records is a usage error") {
  Ctx ctx(1);
  auto fctx = ctx.context();
  Prompt prompt = make_root_prompt("base", Provenance::default_prompt);
  CHECK_THROWS_AS(generate_negative_feedback(fctx, prompt, {}, "b"), Error);
}

TEST_CASE("diversification config validates") {
  DiversificationConfig c;
  c.k = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.k = 1;
  c.examples_char_budget = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("schedule gating") {
  ReinforcementSchedule s;
  s.positive_enabled = true;
  s.positive_start_depth = 3;
  CHECK_FALSE(s.positive_active(0));
  CHECK_FALSE(s.positive_active(2));
  CHECK(s.positive_active(3));
  CHECK(s.positive_active(7));
  s.positive_enabled = false;
  CHECK_FALSE(s.positive_active(9));
  s.positive_enabled = true;
  s.positive_start_depth = 0;
  CHECK(s.positive_active(0));
}

TEST_CASE("compose_bundle emits signals per the schedule") {
  ReinforcementSchedule schedule;
  schedule.positive_enabled = true;
  schedule.positive_start_depth = 2;
  Prompt prompt = make_root_prompt("base", Provenance::default_prompt);
  std::vector<PredictionRecord> mixed{rec("e1", false), rec("e2", true)};

  SUBCASE("below the start depth only the negative side fires") {
    Ctx ctx(1);
    auto fctx = ctx.context();
    FeedbackBundle bundle = compose_bundle(fctx, prompt, mixed, 1, schedule, "b");
    CHECK(bundle.negative.has_value());
    CHECK_FALSE(bundle.positive.has_value());
    CHECK(bundle.depth == 1);
  }
  SUBCASE("at the start depth both sides fire") {
    Ctx ctx(1);
    auto fctx = ctx.context();
    FeedbackBundle bundle = compose_bundle(fctx, prompt, mixed, 2, schedule, "b");
    CHECK(bundle.negative.has_value());
    CHECK(bundle.positive.has_value());
    CHECK(bundle.positive->polarity == Polarity::positive);
  }
  SUBCASE("all-correct below the gate is an empty bundle") {
    Ctx ctx(1);
    auto fctx = ctx.context();
    std::vector<PredictionRecord> all_correct{rec("e1", true), rec("e2", true)};
    CHECK_THROWS_AS(compose_bundle(fctx, prompt, all_correct, 0, schedule, "b"),
                    EmptyBundleError);
  }
  SUBCASE("all-correct at the gate yields a positive-only bundle") {
    Ctx ctx(1);
    auto fctx = ctx.context();
    std::vector<PredictionRecord> all_correct{rec("e1", true), rec("e2", true)};
    FeedbackBundle bundle =
        compose_bundle(fctx, prompt, all_correct, 2, schedule, "b");
    CHECK_FALSE(bundle.negative.has_value());
    CHECK(bundle.positive.has_value());
  }
  SUBCASE("disabled positive reinforcement never fires") {
    Ctx ctx(1);
    auto fctx = ctx.context();
    ReinforcementSchedule off;
    off.positive_enabled = false;
    FeedbackBundle bundle = compose_bundle(fctx, prompt, mixed, 9, off, "b");
    CHECK(bundle.negative.has_value());
    CHECK_FALSE(bundle.positive.has_value());
  }
  SUBCASE("no records is a usage error") {
    Ctx ctx(1);
    auto fctx = ctx.context();
    CHECK_THROWS_AS(compose_bundle(fctx, prompt, {}, 0, schedule, "b"), Error);
  }
}

TEST_CASE("balanced bundle costs 2k+2 samples when reviews disagree") {
  Ctx ctx(3);
  auto fctx = ctx.context();
  ReinforcementSchedule schedule;
  schedule.positive_start_depth = 0;
  Prompt prompt = make_root_prompt("base", Provenance::default_prompt);
  std::vector<PredictionRecord> mixed{rec("e1", false), rec("e2", true)};
  compose_bundle(fctx, prompt, mixed, 0, schedule, "b");

  CallLedger ledger = ctx.gateway->ledger_snapshot();
  CHECK(ledger.role(RoleTag::feedback).requests == 2);
  CHECK(ledger.role(RoleTag::feedback).samples == 6);
  CHECK(ledger.role(RoleTag::summarize).requests == 2);
  CHECK(ledger.role(RoleTag::summarize).samples == 2);
  CHECK(ledger.total_samples() == 2 * 3 + 2);
}

TEST_CASE("signal and bundle json shapes") {
  FeedbackSignal signal;
  signal.polarity = Polarity::positive;
  signal.text = "advice";
  signal.prompt_id = "pid";
  signal.batch_id = "bid";
  signal.k = 6;
  signal.aggregate = true;
  signal.sample_ids = {"s1", "s2"};
  nlohmann::json j = signal.to_json();
  CHECK(j.at("polarity") == "positive");
  CHECK(j.at("k") == 6);
  CHECK(j.at("aggregate") == true);
  CHECK(j.at("sample_ids").size() == 2);

  FeedbackBundle bundle;
  bundle.depth = 4;
  bundle.negative = signal;
  bundle.negative->polarity = Polarity::negative;
  nlohmann::json s = bundle.summary_json();
  CHECK(s.at("depth") == 4);
  CHECK(s.at("negative") == true);
  CHECK(s.at("positive") == false);
  CHECK(s.contains("negative_id"));
  CHECK_FALSE(s.contains("positive_id"));
}

}  // TEST_SUITE
