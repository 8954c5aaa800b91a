// Microbenchmarks for the engine's hot paths: tree selection, request
// canonicalization, world evaluation, and feedback aggregation.

#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "bread/chat.hpp"
#include "bread/feedback.hpp"
#include "bread/hash.hpp"
#include "bread/rng.hpp"
#include "bread/search.hpp"
#include "bread/world.hpp"

namespace {

using namespace bread;

// Balanced 4-ary tree; internal nodes visited and expanded, leaves fresh.
// Selection descends to a leaf without mutating flags, so the same state can
// be reused across iterations.
SearchState make_tree(int node_count) {
  SearchState state;
  Rng rng(42);
  Prompt root;
  root.id = "n0";
  root.text = "n0";
  state.add_node(root, -1);
  for (int i = 1; i < node_count; ++i) {
    int parent = (i - 1) / 4;
    Prompt p;
    p.id = "n" + std::to_string(i);
    p.text = p.id;
    p.depth = state.nodes[static_cast<size_t>(parent)].prompt.depth + 1;
    state.add_node(p, parent);
  }
  for (auto& node : state.nodes) {
    node.expanded = !node.children.empty();
    node.visits = node.expanded ? 8 + static_cast<int>(rng.uniform_below(32)) : 1;
    node.value_sum = node.visits * rng.uniform_real();
  }
  return state;
}

void BM_mcts_select(benchmark::State& bench) {
  SearchState tree = make_tree(static_cast<int>(bench.range(0)));
  for (auto _ : bench)
    benchmark::DoNotOptimize(mcts_select(tree, 1.4142135623730951, 1 << 20));
}
BENCHMARK(BM_mcts_select)->Arg(64)->Arg(1024)->Arg(16384);

void BM_backpropagate(benchmark::State& bench) {
  const int depth = static_cast<int>(bench.range(0));
  SearchState chain;
  Prompt root;
  root.id = "n0";
  root.text = "n0";
  chain.add_node(root, -1);
  for (int i = 1; i < depth; ++i) {
    Prompt p;
    p.id = "n" + std::to_string(i);
    p.text = p.id;
    p.depth = i;
    chain.add_node(p, i - 1);
  }
  const int leaf = depth - 1;
  for (auto _ : bench) backpropagate(chain, leaf, 0.5);
}
BENCHMARK(BM_backpropagate)->Arg(8)->Arg(64)->Arg(512);

CompletionRequest sample_request() {
  CompletionRequest req;
  req.messages = {
      {MessageRole::system, std::string(600, 'p') + " respond with <answer>...</answer>"},
      {MessageRole::user, std::string(400, 'q')}};
  req.temperature = 1.0;
  req.max_output_tokens = 512;
  req.sample_count = 6;
  req.role_tag = RoleTag::feedback;
  req.model = "bench-model";
  return req;
}

void BM_canonical_request(benchmark::State& bench) {
  CompletionRequest req = sample_request();
  for (auto _ : bench) benchmark::DoNotOptimize(canonical_request_string(req));
}
BENCHMARK(BM_canonical_request);

void BM_request_hash(benchmark::State& bench) {
  CompletionRequest req = sample_request();
  for (auto _ : bench) benchmark::DoNotOptimize(request_hash(req));
}
BENCHMARK(BM_request_hash);

void BM_digest(benchmark::State& bench) {
  std::string payload(static_cast<size_t>(bench.range(0)), 'x');
  for (auto _ : bench) benchmark::DoNotOptimize(digest(payload));
  bench.SetBytesProcessed(static_cast<int64_t>(bench.iterations()) * bench.range(0));
}
BENCHMARK(BM_digest)->Arg(64)->Arg(4096)->Arg(65536);

void BM_world_split_accuracy(benchmark::State& bench) {
  TokenWorld world = make_convergence_world();
  std::string prompt;
  for (const auto& t : world.vocabulary) prompt += t + " ";
  for (auto _ : bench)
    benchmark::DoNotOptimize(world.split_accuracy(prompt, "validation"));
}
BENCHMARK(BM_world_split_accuracy);

void BM_world_forward(benchmark::State& bench) {
  WorldBackend backend(make_convergence_world());
  CompletionRequest req;
  req.messages = {{MessageRole::system, "instr00 instr01 instr02"},
                  {MessageRole::user, "case t00: which instructions apply here?"}};
  req.role_tag = RoleTag::target_forward;
  for (auto _ : bench) benchmark::DoNotOptimize(backend.generate(req));
}
BENCHMARK(BM_world_forward);

void BM_majority_lines(benchmark::State& bench) {
  const int k = static_cast<int>(bench.range(0));
  std::vector<std::string> texts;
  Rng rng(7);
  for (int s = 0; s < k; ++s) {
    std::string text;
    for (int l = 0; l < 12; ++l) {
      // Two thirds shared across samples, one third sample-specific noise.
      if (l % 3 == 2)
        text += "ADD noise" + std::to_string(rng.uniform_below(100)) + "\n";
      else
        text += "ADD instr" + std::to_string(l) + "\n";
    }
    texts.push_back(text);
  }
  for (auto _ : bench) benchmark::DoNotOptimize(strict_majority_lines(texts));
}
BENCHMARK(BM_majority_lines)->Arg(3)->Arg(6)->Arg(12);

}  // namespace

BENCHMARK_MAIN();
