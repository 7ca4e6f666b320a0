// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/agents/agents.hpp"
#include "webpilot/search/uct.hpp"

#include <atomic>
#include <cmath>
#include <optional>
#include <vector>

namespace webpilot::search {

enum class Strategy { bfs, dfs, mcts };

std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view s);

struct SearchConfig {
    Strategy strategy = Strategy::mcts;
    int branching = 2;
    int max_depth = 3;
    int iterations = 20;   // mcts iterations; expansion budget for bfs/dfs
    double exploration = std::sqrt(2.0);
    double sample_temperature = 1.0;
    double value_threshold = 0.95;
    FeatureSet grounding_features = grounding::default_grounding_features();
    grounding::ElementFilter element_filter;
};

void validate(const SearchConfig& cfg);

struct SearchNode {
    int id = 0;
    std::optional<int> parent;
    std::optional<ActionDescription> action;
    std::optional<GroundedAction> grounded;
    std::optional<EvaluationRecord> evaluation;
    std::string pre_url;
    std::string post_url;
    int depth = 0;
    int visits = 0;
    double total_value = 0.0;
    std::vector<int> children;
    std::optional<double> value;   // value_of result, cached once evaluated
    bool expanded = false;
    bool terminal = false;
    bool invalid = false;

    std::optional<double> mean_value() const
    {
        return visits > 0 ? std::optional<double>(total_value / visits) : std::nullopt;
    }
};

class SearchTree {
public:
    SearchTree();

    const SearchNode& root() const { return nodes_.front(); }
    const SearchNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    SearchNode& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
    const std::vector<SearchNode>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }

    int add_child(int parent, ActionDescription action);

    /// Node ids from the first action below the root down to `id` (empty for the root).
    std::vector<int> path_to(int id) const;

    /// Order in which nodes were evaluated (root first).
    std::vector<int>& visit_order() { return visit_order_; }
    const std::vector<int>& visit_order() const { return visit_order_; }

    /// Nodes as {id, parent, action, N, W, depth, value, terminal, invalid}.
    Json export_json() const;

private:
    std::vector<SearchNode> nodes_;
    std::vector<int> visit_order_;
};

struct ValueEstimate {
    double value = 0.0;
    bool clamped = false;
    bool unparseable = false;
};

/// First decimal number in `reply`, clamped to [0,1]; nullopt when there is none.
std::optional<ValueEstimate> parse_value_reply(std::string_view reply);

/// Scores a trajectory from its goal, plan, (action, evaluation) history and the current screenshot.
/// An unparseable reply is re-prompted once, then scored 0.0 with the unparseable flag.
ValueEstimate value_of(const Goal& goal, const Plan& plan, const Trajectory& trajectory,
                       const std::optional<ImageHandle>& screenshot, llm::ChatModel& model,
                       const llm::ModelConfig& cfg);

/// Up to k distinct candidate actions (exact-text duplicates collapsed); empty means terminal.
std::vector<ActionDescription> sample_actions(const agents::PolicyContext& ctx, int k, llm::ChatModel& model,
                                              const llm::ModelConfig& cfg, double temperature);

/// Best node: for mcts, follow max-N children from the root (ties: higher Q, then insertion order);
/// for bfs/dfs, the highest value, ties to the earliest evaluated. Throws when nothing was evaluated.
int best_node(const SearchTree& tree, Strategy strategy);

struct SearchDeps {
    browser::PageDriver& driver;
    llm::ModelSet& models;
    EventSink sink;
    const std::atomic<bool>* cancel = nullptr;   // checked between iterations
};

class TreeSearch {
public:
    TreeSearch(Goal goal, Plan plan, SearchConfig cfg, SearchDeps deps);

    /// One selection/expansion/evaluation/backprop pass. False when replay diverged.
    bool mcts_iteration();

    /// Runs cfg.iterations MCTS iterations; returns how many completed.
    int run_mcts();

    /// Breadth- or depth-first expansion under the cfg.iterations expansion budget.
    void run_simple();

    const SearchTree& tree() const { return tree_; }
    int completed_iterations() const { return completed_; }
    Trajectory trajectory_to(int id) const;
    Trajectory best_trajectory() const;

private:
    void evaluate(int id);
    void expand(int id);
    bool restore_state(int parent);
    void progress(int iteration);
    agents::History history_to(int id) const;
    bool cancelled() const { return deps_.cancel && deps_.cancel->load(); }

    Goal goal_;
    Plan plan_;
    SearchConfig cfg_;
    SearchDeps deps_;
    SearchTree tree_;
    int browser_at_ = -1;   // node whose post-action state the browser shows
    int completed_ = 0;
};

struct SearchOutcome {
    std::optional<Trajectory> best;   // empty when the search failed
    int best_node = 0;
    double best_value = 0.0;
    int completed_iterations = 0;
    Json tree;
};

/// Emits plan_generated, search_progress per iteration, then exactly one done or error event.
SearchOutcome run_search(const Goal& goal, const std::optional<Plan>& user_plan, const SearchConfig& cfg,
                         SearchDeps deps);

} // namespace webpilot::search
