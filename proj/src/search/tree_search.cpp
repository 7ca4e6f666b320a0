// SPDX-License-Identifier: Apache-2.0
#include "webpilot/search/tree_search.hpp"

#include "webpilot/replay/replay.hpp"

#include <algorithm>
#include <deque>
#include <regex>
#include <set>

namespace webpilot::search {

namespace {

constexpr const char* value_system_prompt =
    "You judge the progress of a web agent. Given the task, the plan, the actions taken so far with their "
    "outcomes and a screenshot of the current page, reply with a single number between 0 and 1: how likely "
    "it is that the task has been completed.";

std::vector<llm::ChatMessage> value_prompt(const Goal& goal, const Plan& plan, const Trajectory& t,
                                           const std::optional<ImageHandle>& screenshot)
{
    std::string body = "Task: " + goal.text() + "\nStarting URL: " + goal.starting_url() + "\nPlan:\n" +
                       plan.text() + "\nHistory:\n";
    for (std::size_t i = 0; i < t.steps().size(); ++i) {
        auto const& s = t.steps()[i];
        body += std::to_string(i + 1) + ". " + s.action().text() + " -> " +
                (s.evaluation().ok() ? "success" : "failure") + ": " + s.evaluation().message() + "\n";
    }
    body += "Score:";
    auto user = llm::ChatMessage::user(std::move(body));
    if (screenshot && !screenshot->empty())
        user.images.push_back(*screenshot);
    return {llm::ChatMessage::system(value_system_prompt), std::move(user)};
}

void emit(const EventSink& sink, EventKind kind, Json payload)
{
    if (sink)
        sink(kind, std::nullopt, std::move(payload));
}

} // namespace

std::string_view to_string(Strategy s)
{
    switch (s) {
    case Strategy::bfs: return "bfs";
    case Strategy::dfs: return "dfs";
    case Strategy::mcts: return "mcts";
    }
    return "mcts";
}

std::optional<Strategy> parse_strategy(std::string_view s)
{
    for (auto k : {Strategy::bfs, Strategy::dfs, Strategy::mcts})
        if (to_string(k) == s)
            return k;
    return std::nullopt;
}

void validate(const SearchConfig& cfg)
{
    if (cfg.branching < 1)
        throw PreconditionError("search branching must be at least 1");
    if (cfg.max_depth < 1)
        throw PreconditionError("search max_depth must be at least 1");
    if (cfg.iterations < 1)
        throw PreconditionError("search iterations must be at least 1");
    if (!(cfg.exploration >= 0.0))
        throw PreconditionError("search exploration constant must be non-negative");
    if (!(cfg.sample_temperature >= 0.0))
        throw PreconditionError("sample temperature must be non-negative");
    if (!(cfg.value_threshold >= 0.0 && cfg.value_threshold <= 1.0))
        throw PreconditionError("value threshold must lie in [0,1]");
    if (cfg.grounding_features.empty())
        throw PreconditionError("grounding features must not be empty");
}

// ---- tree ----

SearchTree::SearchTree()
{
    nodes_.emplace_back();
}

int SearchTree::add_child(int parent, ActionDescription action)
{
    auto& p = node(parent);
    SearchNode child;
    child.id = static_cast<int>(nodes_.size());
    child.parent = parent;
    child.depth = p.depth + 1;
    child.action = std::move(action);
    p.children.push_back(child.id);
    nodes_.push_back(std::move(child));
    return nodes_.back().id;
}

std::vector<int> SearchTree::path_to(int id) const
{
    std::vector<int> path;
    for (int cur = id; cur != 0; cur = *node(cur).parent)
        path.push_back(cur);
    std::reverse(path.begin(), path.end());
    return path;
}

Json SearchTree::export_json() const
{
    Json out = Json::array();
    for (auto const& n : nodes_) {
        Json j;
        j["id"] = n.id;
        j["parent"] = n.parent ? Json(*n.parent) : Json(nullptr);
        j["action"] = n.action ? Json(n.action->text()) : Json(nullptr);
        j["N"] = n.visits;
        j["W"] = n.total_value;
        j["depth"] = n.depth;
        j["value"] = n.value ? Json(*n.value) : Json(nullptr);
        j["terminal"] = n.terminal;
        j["invalid"] = n.invalid;
        out.push_back(std::move(j));
    }
    return out;
}

// ---- model helpers ----

std::optional<ValueEstimate> parse_value_reply(std::string_view reply)
{
    static const std::regex number(R"([-+]?(\d+(\.\d*)?|\.\d+))");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(reply.begin(), reply.end(), m, number))
        return std::nullopt;
    double v = std::stod(m.str());
    ValueEstimate out;
    out.value = std::clamp(v, 0.0, 1.0);
    out.clamped = out.value != v;
    return out;
}

ValueEstimate value_of(const Goal& goal, const Plan& plan, const Trajectory& trajectory,
                       const std::optional<ImageHandle>& screenshot, llm::ChatModel& model,
                       const llm::ModelConfig& cfg)
{
    auto messages = value_prompt(goal, plan, trajectory, screenshot);
    auto reply = model.complete(messages, cfg);
    if (auto v = parse_value_reply(reply))
        return *v;
    messages.push_back(llm::ChatMessage::assistant(reply));
    messages.push_back(llm::ChatMessage::user("Reply with only a number between 0 and 1."));
    if (auto v = parse_value_reply(model.complete(messages, cfg)))
        return *v;
    return {0.0, false, true};
}

std::vector<ActionDescription> sample_actions(const agents::PolicyContext& ctx, int k, llm::ChatModel& model,
                                              const llm::ModelConfig& cfg, double temperature)
{
    if (k < 1)
        throw PreconditionError("sample_actions needs k >= 1");
    auto sampling = cfg;
    sampling.temperature = temperature;
    auto messages = agents::policy_prompt(ctx, agents::AgentKind::function_calling);
    auto calls = model.sample_tool_calls(messages, grounding::policy_tools(), sampling, k);

    int step = static_cast<int>(ctx.history.size());
    std::vector<ActionDescription> out;
    std::set<std::string> seen;
    for (auto const& c : calls) {
        auto text = agents::render_action(c);
        if (!seen.insert(text).second)
            continue;
        out.emplace_back(std::move(text), step);
        if (static_cast<int>(out.size()) == k)
            break;
    }
    return out;
}

int best_node(const SearchTree& tree, Strategy strategy)
{
    if (strategy == Strategy::mcts) {
        int cur = 0;
        for (;;) {
            int pick = -1;
            for (int c : tree.node(cur).children) {
                auto const& n = tree.node(c);
                if (n.invalid || n.visits == 0)
                    continue;
                if (pick < 0) {
                    pick = c;
                    continue;
                }
                auto const& b = tree.node(pick);
                if (n.visits > b.visits || (n.visits == b.visits && *n.mean_value() > *b.mean_value()))
                    pick = c;
            }
            if (pick < 0)
                break;
            cur = pick;
        }
        if (cur == 0)
            throw InvariantViolation("search evaluated no node");
        return cur;
    }
    int best = -1;
    for (int id : tree.visit_order()) {
        auto const& n = tree.node(id);
        if (id == 0 || n.invalid || !n.value)
            continue;
        if (best < 0 || *n.value > *tree.node(best).value)
            best = id;
    }
    if (best < 0)
        throw InvariantViolation("search evaluated no node");
    return best;
}

// ---- search ----

TreeSearch::TreeSearch(Goal goal, Plan plan, SearchConfig cfg, SearchDeps deps)
    : goal_(std::move(goal)), plan_(std::move(plan)), cfg_(std::move(cfg)), deps_(std::move(deps))
{
    validate(cfg_);
    tree_.visit_order().push_back(0);
}

Trajectory TreeSearch::trajectory_to(int id) const
{
    Trajectory t(goal_, plan_);
    for (int n : tree_.path_to(id)) {
        auto const& node = tree_.node(n);
        if (!node.evaluation)
            throw InvariantViolation("path contains an unevaluated node");
        t.append(TrajectoryStep(*node.action, node.grounded, *node.evaluation, node.pre_url, node.post_url));
    }
    return t;
}

Trajectory TreeSearch::best_trajectory() const
{
    return trajectory_to(best_node(tree_, cfg_.strategy));
}

agents::History TreeSearch::history_to(int id) const
{
    agents::History h;
    for (int n : tree_.path_to(id)) {
        auto const& node = tree_.node(n);
        h.push_back({*node.action, *node.evaluation});
    }
    return h;
}

bool TreeSearch::restore_state(int parent)
{
    if (browser_at_ == parent)
        return true;
    auto result = replay::replay(trajectory_to(parent), deps_.driver);
    if (result.diverged() || !result.navigation.ok()) {
        browser_at_ = -1;
        auto path = tree_.path_to(parent);
        if (result.divergence && *result.divergence < path.size())
            tree_.node(path[*result.divergence]).invalid = true;
        return false;
    }
    browser_at_ = parent;
    return true;
}

void TreeSearch::evaluate(int id)
{
    auto& driver = deps_.driver;
    auto& models = deps_.models;
    int parent = *tree_.node(id).parent;
    if (!restore_state(parent)) {
        tree_.node(id).invalid = true;
        return;
    }

    auto action = *tree_.node(id).action;
    auto pre_url = driver.current_url();
    auto obs = driver.capture_observation(cfg_.grounding_features);
    std::optional<GroundedAction> grounded;
    std::optional<EvaluationRecord> evaluation;
    try {
        grounded = grounding::ground_action({action, obs, cfg_.grounding_features, cfg_.element_filter},
                                            grounding::grounding_tools(), *models.grounding, models.config, driver);
        evaluation = driver.execute(*grounded);
    } catch (const grounding::GroundingFailure& e) {
        evaluation = EvaluationRecord::failure(std::string("grounding failed: ") + e.what());
    }
    browser_at_ = id;

    auto& n = tree_.node(id);
    n.grounded = grounded;
    n.evaluation = evaluation;
    n.pre_url = pre_url;
    n.post_url = driver.current_url();
    auto estimate = value_of(goal_, plan_, trajectory_to(id), driver.screenshot(), *models.value, models.config);
    auto& m = tree_.node(id);
    m.value = estimate.value;
    if ((grounded && grounded->kind() == ActionKind::finish) || estimate.value >= cfg_.value_threshold)
        m.terminal = true;
    tree_.visit_order().push_back(id);
}

void TreeSearch::expand(int id)
{
    auto history = history_to(id);
    agents::PolicyContext ctx{goal_, plan_, nullptr, history};
    auto actions = sample_actions(ctx, cfg_.branching, *deps_.models.policy, deps_.models.config,
                                  cfg_.sample_temperature);
    auto& n = tree_.node(id);
    n.expanded = true;
    if (actions.empty()) {
        n.terminal = true;
        return;
    }
    for (auto& a : actions)
        tree_.add_child(id, std::move(a));
}

void TreeSearch::progress(int iteration)
{
    emit(deps_.sink, EventKind::search_progress,
         {{"strategy", to_string(cfg_.strategy)}, {"iteration", iteration}, {"tree", tree_.export_json()}});
}

bool TreeSearch::mcts_iteration()
{
    std::vector<int> path{0};
    int id = 0;
    for (;;) {
        auto& n = tree_.node(id);
        if (n.terminal || n.depth >= cfg_.max_depth)
            break;
        if (!n.expanded) {
            expand(id);
            if (tree_.node(id).terminal)
                break;
            id = tree_.node(id).children.front();
            path.push_back(id);
            evaluate(id);
            if (tree_.node(id).invalid)
                return false;
            break;
        }
        int pick = -1;
        double pick_score = 0.0;
        for (int c : n.children) {
            auto const& child = tree_.node(c);
            if (child.invalid)
                continue;
            double score = uct_score(child.total_value, child.visits, n.visits, cfg_.exploration);
            if (pick < 0 || score > pick_score) {
                pick = c;
                pick_score = score;
            }
        }
        if (pick < 0) {
            tree_.node(id).terminal = true;
            break;
        }
        id = pick;
        path.push_back(id);
        if (!tree_.node(id).value) {
            evaluate(id);
            if (tree_.node(id).invalid)
                return false;
            break;
        }
    }

    double v = tree_.node(id).value.value_or(0.0);
    for (int p : path) {
        auto& n = tree_.node(p);
        n.visits += 1;
        n.total_value += v;
    }
    ++completed_;
    return true;
}

int TreeSearch::run_mcts()
{
    for (int i = 0; i < cfg_.iterations && !cancelled(); ++i) {
        mcts_iteration();
        progress(i + 1);
    }
    return completed_;
}

void TreeSearch::run_simple()
{
    bool breadth = cfg_.strategy == Strategy::bfs;
    std::deque<int> frontier{0};
    int expansions = 0;
    int visits = 0;
    while (!frontier.empty() && !cancelled()) {
        int id = breadth ? frontier.front() : frontier.back();
        if (breadth)
            frontier.pop_front();
        else
            frontier.pop_back();
        if (id != 0) {
            evaluate(id);
            auto& n = tree_.node(id);
            if (!n.invalid) {
                n.visits = 1;
                n.total_value = *n.value;
            }
            progress(++visits);
            if (n.invalid)
                continue;
        }
        auto const& n = tree_.node(id);
        if (n.terminal || n.depth >= cfg_.max_depth || expansions >= cfg_.iterations)
            continue;
        expand(id);
        ++expansions;
        auto const& kids = tree_.node(id).children;
        if (breadth)
            frontier.insert(frontier.end(), kids.begin(), kids.end());
        else
            frontier.insert(frontier.end(), kids.rbegin(), kids.rend());
    }
    completed_ = visits;
}

SearchOutcome run_search(const Goal& goal, const std::optional<Plan>& user_plan, const SearchConfig& cfg,
                         SearchDeps deps)
{
    auto plan = user_plan.value_or(Plan::user_supplied(goal.text()));
    SearchOutcome out;
    auto fail = [&](const std::string& message) {
        emit(deps.sink, EventKind::error, {{"message", message}, {"tree", out.tree}});
        return out;
    };
    try {
        validate(cfg);
        emit(deps.sink, EventKind::plan_generated, {{"plan", to_json(plan)}, {"workflows", Json::array()}});
        TreeSearch search(goal, plan, cfg, deps);
        if (cfg.strategy == Strategy::mcts)
            search.run_mcts();
        else
            search.run_simple();
        out.tree = search.tree().export_json();
        out.completed_iterations = search.completed_iterations();
        out.best_node = best_node(search.tree(), cfg.strategy);
        out.best = search.trajectory_to(out.best_node);
        out.best_value = search.tree().node(out.best_node).value.value_or(0.0);
    } catch (const browser::DriverError& e) {
        return fail(std::string("browser driver failure: ") + e.what());
    } catch (const llm::GatewayError& e) {
        return fail(std::string("model failure: ") + e.what());
    } catch (const InvariantViolation& e) {
        return fail(e.what());
    }
    emit(deps.sink, EventKind::done,
         {{"reason", "search_complete"},
          {"strategy", to_string(cfg.strategy)},
          {"best_node", out.best_node},
          {"best_value", out.best_value},
          {"completed_iterations", out.completed_iterations},
          {"steps", out.best->size()},
          {"final_url", out.best->empty() ? goal.starting_url() : out.best->steps().back().post_url()},
          {"trajectory", to_json(*out.best)},
          {"tree", out.tree}});
    return out;
}

} // namespace webpilot::search
