#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "bread/feedback.hpp"
#include "bread/forward_eval.hpp"
#include "bread/update.hpp"

namespace bread {

enum class Strategy { mcts, beam, greedy };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct SearchConfig {
  Strategy strategy = Strategy::mcts;
  int max_iterations = 15;
  int max_depth = 10;
  int expansion_width = 3;
  double exploration_c = 1.4142135623730951;
  int beam_width = 4;
  int batch_size = 5;

  void validate() const;
};

struct SearchNode {
  Prompt prompt;
  int visits = 0;
  double value_sum = 0.0;
  int parent = -1;
  std::vector<int> children;
  bool expanded = false;
  bool terminal = false;

  double mean() const { return visits > 0 ? value_sum / visits : 0.0; }
};

struct SearchState {
  std::vector<SearchNode> nodes;  // node 0 is the root
  std::unordered_map<std::string, int> by_prompt_id;
  std::vector<int> frontier;  // beam/greedy working set
  int best_node = 0;
  double best_accuracy = 0.0;
  int iteration = 0;  // completed iterations
  bool done = false;
  std::string done_reason;

  int add_node(const Prompt& prompt, int parent);
  int find_node(const std::string& prompt_id) const;  // -1 when absent

  nlohmann::json to_json() const;
  static SearchState from_json(const nlohmann::json& j);
};

/// Everything one search run needs from the rest of the engine.
struct EngineHandles {
  const TaskSpec& task;
  Gateway& gateway;
  Evaluator& evaluator;
  const TemplateSet& templates;
  Prompt initial_prompt;
  ReinforcementSchedule schedule;
  DiversificationConfig diversification;
  UpdateConfig update;
  GenParams gen;
  uint64_t run_seed = 1;

  /// One JSON line per iteration, append-only.
  std::function<void(const nlohmann::json&)> trace_sink;
  /// Called after every completed iteration with the serializable state.
  std::function<void(const SearchState&)> checkpoint_sink;
  /// Test hook: returning true after iteration n stops the loop resumably.
  std::function<bool(int)> should_halt;
};

struct SearchResult {
  Prompt best;
  double best_validation = 0.0;
  SearchState state;
  CallLedger ledger;
};

/// UCT descent from the root: unvisited children first (insertion order),
/// then argmax of mean + c*sqrt(ln(parent.visits)/child.visits) with ties
/// broken by insertion order. Returns the first unexpanded or depth-capped
/// node, or -1 when the whole tree is terminal. Subtrees found fully terminal
/// are marked terminal on the way.
int mcts_select(SearchState& state, double exploration_c, int max_depth);

/// visits += 1 and value_sum += reward on the node and every ancestor.
void backpropagate(SearchState& state, int node, double reward);

/// Runs the configured strategy until max_iterations or a terminal condition
/// (validation accuracy 1.0, nothing left to expand, or an empty feedback
/// bundle at the root). Pass a restored state to resume a checkpointed run.
SearchResult run_search(const SearchConfig& config, EngineHandles& handles,
                        SearchState* resume = nullptr);

}  // namespace bread
