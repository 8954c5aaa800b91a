#include "bread/search.hpp"

#include <algorithm>
#include <cmath>

#include "bread/errors.hpp"
#include "bread/rng.hpp"

namespace bread {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::mcts: return "mcts";
    case Strategy::beam: return "beam";
    case Strategy::greedy: return "greedy";
  }
  return "mcts";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "mcts") return Strategy::mcts;
  if (s == "beam") return Strategy::beam;
  if (s == "greedy") return Strategy::greedy;
  throw Error(ErrorKind::config, "unknown strategy: " + s);
}

void SearchConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorKind::config, "max_iterations must be >= 1");
  if (max_depth < 1) throw Error(ErrorKind::config, "max_depth must be >= 1");
  if (expansion_width < 1) throw Error(ErrorKind::config, "expansion_width must be >= 1");
  if (beam_width < 1) throw Error(ErrorKind::config, "beam_width must be >= 1");
  if (batch_size < 1) throw Error(ErrorKind::config, "batch_size must be >= 1");
  if (exploration_c <= 0) throw Error(ErrorKind::config, "exploration_c must be > 0");
}

int SearchState::add_node(const Prompt& prompt, int parent) {
  SearchNode node;
  node.prompt = prompt;
  node.parent = parent;
  nodes.push_back(std::move(node));
  int idx = static_cast<int>(nodes.size()) - 1;
  by_prompt_id[prompt.id] = idx;
  if (parent >= 0) nodes[static_cast<size_t>(parent)].children.push_back(idx);
  return idx;
}

int SearchState::find_node(const std::string& prompt_id) const {
  auto it = by_prompt_id.find(prompt_id);
  return it == by_prompt_id.end() ? -1 : it->second;
}

nlohmann::json SearchState::to_json() const {
  nlohmann::json nodes_json = nlohmann::json::array();
  for (const auto& n : nodes)
    nodes_json.push_back({{"prompt", n.prompt.to_json()},
                          {"visits", n.visits},
                          {"value_sum", n.value_sum},
                          {"parent", n.parent},
                          {"children", n.children},
                          {"expanded", n.expanded},
                          {"terminal", n.terminal}});
  return {{"nodes", nodes_json},
          {"frontier", frontier},
          {"best_node", best_node},
          {"best_accuracy", best_accuracy},
          {"iteration", iteration},
          {"done", done},
          {"done_reason", done_reason}};
}

SearchState SearchState::from_json(const nlohmann::json& j) {
  SearchState s;
  for (const auto& nj : j.at("nodes")) {
    SearchNode n;
    n.prompt = Prompt::from_json(nj.at("prompt"));
    n.visits = nj.at("visits").get<int>();
    n.value_sum = nj.at("value_sum").get<double>();
    n.parent = nj.at("parent").get<int>();
    n.children = nj.at("children").get<std::vector<int>>();
    n.expanded = nj.at("expanded").get<bool>();
    n.terminal = nj.at("terminal").get<bool>();
    s.by_prompt_id[n.prompt.id] = static_cast<int>(s.nodes.size());
    s.nodes.push_back(std::move(n));
  }
  s.frontier = j.at("frontier").get<std::vector<int>>();
  s.best_node = j.at("best_node").get<int>();
  s.best_accuracy = j.at("best_accuracy").get<double>();
  s.iteration = j.at("iteration").get<int>();
  s.done = j.at("done").get<bool>();
  s.done_reason = j.value("done_reason", "");
  return s;
}

int mcts_select(SearchState& state, double exploration_c, int max_depth) {
  if (state.nodes.empty() || state.nodes[0].terminal) return -1;
  int cur = 0;
  for (;;) {
    SearchNode& node = state.nodes[static_cast<size_t>(cur)];
    if (!node.expanded || node.prompt.depth >= max_depth) return cur;

    int picked = -1;
    for (int child : node.children) {
      const SearchNode& c = state.nodes[static_cast<size_t>(child)];
      if (c.terminal) continue;
      if (c.visits == 0) {
        picked = child;
        break;
      }
    }
    if (picked < 0) {
      double best_score = -1.0;
      for (int child : node.children) {
        const SearchNode& c = state.nodes[static_cast<size_t>(child)];
        if (c.terminal || c.visits == 0) continue;
        double score =
            c.mean() + exploration_c * std::sqrt(std::log(static_cast<double>(
                                                     node.visits)) /
                                                 c.visits);
        if (score > best_score) {
          best_score = score;
          picked = child;
        }
      }
    }
    if (picked < 0) {
      // Expanded node with every child terminal: nothing below it remains.
      node.terminal = true;
      if (cur == 0) return -1;
      cur = 0;
      continue;
    }
    cur = picked;
  }
}

void backpropagate(SearchState& state, int node, double reward) {
  for (int idx = node; idx >= 0; idx = state.nodes[static_cast<size_t>(idx)].parent) {
    state.nodes[static_cast<size_t>(idx)].visits += 1;
    state.nodes[static_cast<size_t>(idx)].value_sum += reward;
  }
}

namespace {

struct IterationTrace {
  nlohmann::json expansions = nlohmann::json::array();
  std::string note;
};

class SearchDriver {
public:
  SearchDriver(const SearchConfig& config, EngineHandles& h, SearchState& state)
      : config_(config), h_(h), state_(state) {}

  void initialize() {
    CallLedger before = h_.gateway.ledger_snapshot();
    int root = state_.add_node(h_.initial_prompt, -1);
    double acc = h_.evaluator.evaluate(h_.initial_prompt, "validation").accuracy;
    backpropagate(state_, root, acc);
    state_.best_node = root;
    state_.best_accuracy = acc;
    state_.frontier = {root};
    if (acc >= 1.0) {
      state_.done = true;
      state_.done_reason = "validation_perfect";
    }
    nlohmann::json record{
        {"iteration", 0},
        {"strategy", to_string(config_.strategy)},
        {"note", "init"},
        {"root", {{"id", h_.initial_prompt.id}, {"text", h_.initial_prompt.text}}},
        {"best", best_json()},
        {"ledger_delta", h_.gateway.ledger_snapshot().delta_since(before).to_json()}};
    if (h_.trace_sink) h_.trace_sink(record);
    if (h_.checkpoint_sink) h_.checkpoint_sink(state_);
  }

  bool step(int iteration) {
    CallLedger before = h_.gateway.ledger_snapshot();
    IterationTrace trace;
    nlohmann::json selected = nlohmann::json::array();

    switch (config_.strategy) {
      case Strategy::mcts: step_mcts(iteration, trace, selected); break;
      case Strategy::beam:
      case Strategy::greedy: step_frontier(iteration, trace, selected); break;
    }

    state_.iteration = iteration;
    if (state_.best_accuracy >= 1.0 && !state_.done) {
      state_.done = true;
      state_.done_reason = "validation_perfect";
    }

    nlohmann::json record{
        {"iteration", iteration},
        {"strategy", to_string(config_.strategy)},
        {"selected", selected},
        {"expansions", trace.expansions},
        {"best", best_json()},
        {"ledger_delta", h_.gateway.ledger_snapshot().delta_since(before).to_json()}};
    if (!trace.note.empty()) record["note"] = trace.note;
    if (state_.done) record["done_reason"] = state_.done_reason;
    if (h_.trace_sink) h_.trace_sink(record);
    if (h_.checkpoint_sink) h_.checkpoint_sink(state_);
    return !state_.done;
  }

private:
  nlohmann::json best_json() const {
    return {{"prompt_id", state_.nodes[static_cast<size_t>(state_.best_node)].prompt.id},
            {"val_accuracy", state_.best_accuracy}};
  }

  void consider_best(int node_idx, double accuracy) {
    const std::string& id =
        state_.nodes[static_cast<size_t>(node_idx)].prompt.id;
    const std::string& cur =
        state_.nodes[static_cast<size_t>(state_.best_node)].prompt.id;
    if (accuracy > state_.best_accuracy ||
        (accuracy == state_.best_accuracy && id < cur)) {
      state_.best_accuracy = accuracy;
      state_.best_node = node_idx;
    }
  }

  int gate_basis(int node_depth, int iteration) const {
    return h_.schedule.gate_on_iteration ? iteration - 1 : node_depth;
  }

  Batch draw_batch(int iteration, int node_idx) {
    Rng rng(derive_seed(h_.run_seed, "batch", static_cast<uint64_t>(iteration),
                        static_cast<uint64_t>(node_idx)));
    return sample_batch(h_.task, static_cast<size_t>(config_.batch_size), rng);
  }

  nlohmann::json records_json(const std::vector<PredictionRecord>& records) const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : records)
      out.push_back({{"id", r.example_id}, {"correct", r.correct}});
    return out;
  }

  /// Expands one node; returns the expansion trace entry. May create nodes,
  /// evaluate children, and update best. Appends evaluated child node
  /// indices (unique, insertion order) to out_children when given.
  nlohmann::json expand_node(int node_idx, int iteration, bool backprop_rewards,
                             std::vector<int>* out_children) {
    // add_node below may reallocate the node vector, so work on a copy of
    // the selected node's prompt instead of holding a reference.
    const Prompt node_prompt = state_.nodes[static_cast<size_t>(node_idx)].prompt;
    const int node_parent = state_.nodes[static_cast<size_t>(node_idx)].parent;
    nlohmann::json entry{{"node_id", node_prompt.id},
                         {"node_depth", node_prompt.depth},
                         {"node_text", node_prompt.text}};

    Batch batch = draw_batch(iteration, node_idx);
    nlohmann::json batch_ids = nlohmann::json::array();
    for (const auto& ex : batch.examples) batch_ids.push_back(ex.id);
    entry["batch"] = batch_ids;

    auto records = forward_generate(node_prompt, batch.examples, h_.task,
                                    h_.gateway, h_.gen, RoleTag::target_forward);
    entry["records"] = records_json(records);

    FeedbackContext fctx{h_.gateway, h_.templates, h_.diversification};
    FeedbackBundle bundle;
    try {
      bundle = compose_bundle(fctx, node_prompt, records,
                              gate_basis(node_prompt.depth, iteration),
                              h_.schedule, batch.batch_id);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::empty_bundle) throw;
      entry["skipped_reason"] = "empty_bundle";
      if (node_parent < 0) {
        state_.done = true;
        state_.done_reason = "empty_bundle_at_root";
      } else {
        state_.nodes[static_cast<size_t>(node_idx)].terminal = true;
        if (backprop_rewards) {
          double own = h_.evaluator.evaluate(node_prompt, "validation").accuracy;
          backpropagate(state_, node_idx, own);
        }
      }
      return entry;
    }
    entry["bundle"] = bundle.summary_json();

    UpdateContext uctx{h_.gateway, h_.templates, h_.update};
    UpdateResult expansion = expand(uctx, node_prompt, records, bundle,
                                    config_.expansion_width, iteration);
    state_.nodes[static_cast<size_t>(node_idx)].expanded = true;
    if (expansion.no_progress) entry["no_progress"] = true;

    nlohmann::json children_json = nlohmann::json::array();
    for (const auto& child : expansion.children) {
      int existing = state_.find_node(child.id);
      bool fresh = existing < 0;
      int cidx = fresh ? state_.add_node(child, node_idx) : existing;
      const Prompt& prompt = state_.nodes[static_cast<size_t>(cidx)].prompt;
      double acc = h_.evaluator.evaluate(prompt, "validation").accuracy;
      if (backprop_rewards) backpropagate(state_, cidx, acc);
      consider_best(cidx, acc);
      if (out_children &&
          std::find(out_children->begin(), out_children->end(), cidx) ==
              out_children->end())
        out_children->push_back(cidx);
      children_json.push_back({{"id", prompt.id},
                               {"text", prompt.text},
                               {"depth", prompt.depth},
                               {"val_accuracy", acc},
                               {"fresh", fresh}});
    }
    entry["children"] = children_json;
    return entry;
  }

  void step_mcts(int iteration, IterationTrace& trace, nlohmann::json& selected) {
    int sel = mcts_select(state_, config_.exploration_c, config_.max_depth);
    if (sel < 0) {
      state_.done = true;
      state_.done_reason = "tree_exhausted";
      trace.note = "tree_exhausted";
      return;
    }
    SearchNode& node = state_.nodes[static_cast<size_t>(sel)];
    selected.push_back({{"id", node.prompt.id}, {"depth", node.prompt.depth}});

    if (node.prompt.depth >= config_.max_depth) {
      // Depth-capped leaf: count a rollout terminating here.
      double own = h_.evaluator.evaluate(node.prompt, "validation").accuracy;
      backpropagate(state_, sel, own);
      trace.note = "depth_capped";
      return;
    }
    trace.expansions.push_back(expand_node(sel, iteration, true, nullptr));
  }

  void step_frontier(int iteration, IterationTrace& trace, nlohmann::json& selected) {
    const int keep = config_.strategy == Strategy::greedy ? 1 : config_.beam_width;
    std::vector<int> evaluated;
    bool any_expandable = false;

    const std::vector<int> frontier = state_.frontier;
    for (int fi : state_.frontier) {
      const Prompt& fp = state_.nodes[static_cast<size_t>(fi)].prompt;
      selected.push_back({{"id", fp.id}, {"depth", fp.depth}});
    }
    for (int fi : frontier) {
      if (state_.nodes[static_cast<size_t>(fi)].prompt.depth >= config_.max_depth ||
          state_.nodes[static_cast<size_t>(fi)].terminal)
        continue;
      any_expandable = true;
      trace.expansions.push_back(expand_node(fi, iteration, false, &evaluated));
      if (state_.done) return;  // empty bundle at root
    }

    if (!any_expandable) {
      state_.done = true;
      state_.done_reason = "frontier_exhausted";
      trace.note = "frontier_exhausted";
      return;
    }
    if (evaluated.empty()) {
      trace.note = "no_candidates";
      return;
    }
    struct Ranked {
      int idx;
      double accuracy;
      std::string id;
    };
    std::vector<Ranked> ranked;
    ranked.reserve(evaluated.size());
    for (int idx : evaluated) {
      const Prompt& p = state_.nodes[static_cast<size_t>(idx)].prompt;
      ranked.push_back({idx, h_.evaluator.evaluate(p, "validation").accuracy, p.id});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
      if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
      return a.id < b.id;
    });
    if (static_cast<int>(ranked.size()) > keep) ranked.resize(static_cast<size_t>(keep));
    state_.frontier.clear();
    for (const auto& r : ranked) state_.frontier.push_back(r.idx);
  }

  const SearchConfig& config_;
  EngineHandles& h_;
  SearchState& state_;
};

}  // namespace

SearchResult run_search(const SearchConfig& config, EngineHandles& handles,
                        SearchState* resume) {
  config.validate();
  handles.diversification.validate();
  handles.update.validate();

  SearchState local;
  SearchState& state = resume ? *resume : local;
  SearchDriver driver(config, handles, state);

  if (state.nodes.empty()) driver.initialize();

  for (int iteration = state.iteration + 1;
       iteration <= config.max_iterations && !state.done; ++iteration) {
    bool keep_going = driver.step(iteration);
    if (handles.should_halt && handles.should_halt(iteration)) break;
    if (!keep_going) break;
  }

  SearchResult result;
  result.state = state;
  result.best = state.nodes[static_cast<size_t>(state.best_node)].prompt;
  result.best_validation = state.best_accuracy;
  result.ledger = handles.gateway.ledger_snapshot();
  return result;
}

}  // namespace bread
