// SPDX-License-Identifier: Apache-2.0
#include "webpilot/agents/agents.hpp"

#include <algorithm>

namespace webpilot::agents {

using llm::ChatMessage;

namespace {

constexpr const char* finish_token = "FINISH";

constexpr const char* function_calling_system =
    "You are a web agent working toward the user's goal in a browser. Decide the single next action "
    "and express it as one tool call. Describe targets in plain words. When the task is complete, "
    "reply in plain text without calling a tool.";

constexpr const char* prompt_system =
    "You are a web agent working toward the user's goal in a browser. Reply with the single next "
    "action in plain words on one line, for example: click the \"Sign in\" button. When the task is "
    "complete, reply with FINISH.";

constexpr const char* planner_system =
    "You plan web tasks. Write a short numbered list of high-level steps. Do not mention page "
    "element identifiers.";

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string in_quotes(const std::string& s) { return "\"" + s + "\""; }

std::string render_history(const History& history)
{
    if (history.empty())
        return "History: (no actions yet)\n";
    std::string out = "History:\n";
    for (std::size_t i = 0; i < history.size(); ++i) {
        auto const& h = history[i];
        out += std::to_string(i + 1) + ". " + h.action.text() + " -> " + std::string(to_string(h.evaluation.status()))
             + ": " + h.evaluation.message();
        if (!h.evaluation.page_summary().empty())
            out += " (page: " + h.evaluation.page_summary() + ")";
        out += "\n";
    }
    return out;
}

std::string render_workflows(const std::vector<memory::WorkflowMemoryEntry>& workflows)
{
    if (workflows.empty())
        return {};
    std::string out = "Relevant workflows:\n";
    for (std::size_t i = 0; i < workflows.size(); ++i) {
        auto const& w = workflows[i];
        out += std::to_string(i + 1) + ". " + w.task_summary + (w.domain.empty() ? "" : " (" + w.domain + ")") + "\n";
        for (auto const& s : w.steps)
            out += "   - " + s + "\n";
    }
    return out + "\n";
}

std::string render_plans(const PolicyContext& ctx)
{
    std::string out = "Goal: " + ctx.goal.text() + "\nStarting URL: " + ctx.goal.starting_url() + "\n\nPlan:\n"
                    + ctx.initial_plan.text() + "\n\n";
    if (ctx.current_plan && ctx.current_plan->revision() > 0)
        out += "Current plan (revision " + std::to_string(ctx.current_plan->revision()) + "):\n"
             + ctx.current_plan->text() + "\n\n";
    return out;
}

/// Prompt-policy reply up to FINISH, reduced to its first non-empty line.
std::optional<std::string> parse_prompt_action(const std::string& reply, bool& saw_finish)
{
    auto text = reply;
    saw_finish = false;
    if (auto pos = text.find(finish_token); pos != std::string::npos) {
        saw_finish = true;
        text = text.substr(0, pos);
    }
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        auto line = trim(std::string_view(text).substr(start, end == std::string::npos ? std::string::npos : end - start));
        for (auto prefix : {"Action:", "action:", "Next action:"})
            if (line.rfind(prefix, 0) == 0)
                line = trim(line.substr(std::string_view(prefix).size()));
        if (!line.empty())
            return line;
        if (end == std::string::npos)
            break;
        start = end + 1;
    }
    return std::nullopt;
}

struct Emitter {
    const EventSink& sink;
    void operator()(EventKind kind, std::optional<int> step, Json payload) const
    {
        if (sink)
            sink(kind, step, std::move(payload));
    }
};

} // namespace

std::string_view to_string(AgentKind k)
{
    switch (k) {
    case AgentKind::function_calling: return "function_calling";
    case AgentKind::high_level_planning: return "high_level_planning";
    case AgentKind::context_aware_planning: return "context_aware_planning";
    case AgentKind::prompt: return "prompt";
    }
    return "function_calling";
}

std::optional<AgentKind> parse_agent_kind(std::string_view s)
{
    for (auto k : {AgentKind::function_calling, AgentKind::high_level_planning, AgentKind::context_aware_planning,
                   AgentKind::prompt})
        if (to_string(k) == s)
            return k;
    return std::nullopt;
}

void validate(const EpisodeConfig& cfg)
{
    if (cfg.max_steps < 1)
        throw InvariantViolation("max_steps must be at least 1");
    if (cfg.replan_every < 1)
        throw InvariantViolation("replan_every must be at least 1");
    if (cfg.memory_top_n < 1)
        throw InvariantViolation("memory_top_n must be at least 1");
    auto const& f = cfg.grounding_features;
    if (!f.contains(Feature::interactive_elements) && !f.contains(Feature::axtree) && !f.contains(Feature::dom))
        throw InvariantViolation("grounding features need interactive_elements, axtree or dom");
}

std::string render_action(const llm::ToolCall& call)
{
    auto arg = [&](const char* key) -> std::optional<std::string> {
        auto it = call.arguments.find(key);
        if (it == call.arguments.end() || it->second.empty())
            return std::nullopt;
        return it->second;
    };
    auto target = [&]() -> std::string {
        if (auto m = arg("mark"))
            return "element [" + *m + "]";
        if (auto t = arg("target"))
            return in_quotes(*t);
        return {};
    };
    auto const& n = call.name;
    std::string out = n;
    if (n == "navigate") {
        out += " " + arg("url").value_or("");
    } else if (n == "fill" || n == "select_option" || n == "upload_file") {
        auto t = target();
        if (!t.empty())
            out += " " + t;
        out += " with " + in_quotes(arg(n == "upload_file" ? "path" : "value").value_or(""));
    } else if (n == "scroll") {
        out += " " + arg("direction").value_or("down");
        if (auto t = target(); !t.empty())
            out += " in " + t;
    } else if (n == "finish") {
        if (auto a = arg("answer"))
            out += " with answer " + in_quotes(*a);
    } else if (n != "go_back") {
        if (auto t = target(); !t.empty())
            out += " " + t;
    }
    return out;
}

std::vector<ChatMessage> policy_prompt(const PolicyContext& ctx, AgentKind kind)
{
    std::string body = render_plans(ctx) + render_history(ctx.history) + "\nWhat is the next action?";
    return {ChatMessage::system(kind == AgentKind::prompt ? prompt_system : function_calling_system),
            ChatMessage::user(std::move(body))};
}

Plan generate_initial_plan(const Goal& goal, const std::vector<memory::WorkflowMemoryEntry>& workflows,
                           llm::ChatModel& model, const llm::ModelConfig& cfg)
{
    std::string body = "Goal: " + goal.text() + "\nStarting URL: " + goal.starting_url() + "\n\n"
                     + render_workflows(workflows) + "Write the plan.";
    auto reply = trim(model.complete({ChatMessage::system(planner_system), ChatMessage::user(std::move(body))}, cfg));
    if (reply.empty())
        throw llm::EmptyCompletion();
    return Plan::generated(std::move(reply));
}

std::optional<ActionDescription> next_action(const PolicyContext& ctx, AgentKind kind, llm::ChatModel& model,
                                             const std::vector<llm::ToolSchema>& tools, const llm::ModelConfig& cfg)
{
    int step = static_cast<int>(ctx.history.size());
    auto messages = policy_prompt(ctx, kind);
    if (kind != AgentKind::prompt) {
        auto reply = llm::complete_with_tools_retrying(model, messages, tools, cfg);
        if (reply.is_text())
            return std::nullopt;
        return ActionDescription(render_action(reply.calls.front()), step);
    }
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string reply;
        try {
            reply = model.complete(messages, cfg);
        } catch (const llm::EmptyCompletion&) {
        }
        bool saw_finish = false;
        auto action = parse_prompt_action(reply, saw_finish);
        if (action)
            return ActionDescription(*action, step);
        if (saw_finish)
            return std::nullopt;
        messages.push_back(ChatMessage::assistant(reply.empty() ? "(empty reply)" : reply));
        messages.push_back(ChatMessage::user("Reply with one next action on a single line, or FINISH if the task is done."));
    }
    throw PolicyError("prompt policy gave neither an action nor FINISH after a re-prompt");
}

std::string render_observation_for_planner(const Observation& obs)
{
    std::string out = "Current page: " + obs.url() + "\n";
    if (auto const& els = obs.interactive_elements()) {
        out += "Interactive elements:\n";
        for (auto const& e : *els)
            out += "  " + grounding::render_element(e) + "\n";
    }
    if (auto const& ax = obs.axtree_text())
        out += "Accessibility tree:\n" + *ax;
    return out;
}

Plan replan(const PolicyContext& ctx, const Plan& latest, AgentKind kind, const Observation* observation,
            const std::vector<memory::WorkflowMemoryEntry>& workflows, llm::ChatModel& model,
            const llm::ModelConfig& cfg)
{
    if (!is_planning(kind))
        throw PreconditionError("replanning applies only to planning agents, not " + std::string(to_string(kind)));
    if (kind == AgentKind::context_aware_planning && !observation)
        throw PreconditionError("context-aware replanning needs the current observation");
    std::string body = "Goal: " + ctx.goal.text() + "\n\nInitial plan:\n" + ctx.initial_plan.text() + "\n\n";
    if (latest.revision() > 0)
        body += "Latest plan (revision " + std::to_string(latest.revision()) + "):\n" + latest.text() + "\n\n";
    body += render_workflows(workflows);
    if (kind == AgentKind::context_aware_planning)
        body += render_observation_for_planner(*observation) + "\n";
    body += render_history(ctx.history) + "\nRevise the plan for the remaining work.";
    auto reply = trim(model.complete({ChatMessage::system(planner_system), ChatMessage::user(std::move(body))}, cfg));
    if (reply.empty())
        throw llm::EmptyCompletion();
    return latest.revised(std::move(reply));
}

std::string_view to_string(TerminalReason r)
{
    switch (r) {
    case TerminalReason::policy_stop: return "policy_stop";
    case TerminalReason::max_steps: return "max_steps";
    case TerminalReason::finish: return "finish";
    case TerminalReason::cancelled: return "cancelled";
    case TerminalReason::error: return "error";
    }
    return "error";
}

Json episode_summary(const EpisodeResult& r)
{
    auto const& steps = r.trajectory.steps();
    Json j;
    j["reason"] = to_string(r.reason);
    j["steps"] = steps.size();
    j["successes"] = std::count_if(steps.begin(), steps.end(), [](auto const& s) { return s.evaluation().ok(); });
    j["final_url"] = steps.empty() ? r.trajectory.goal().starting_url() : steps.back().post_url();
    j["final_plan"] = to_json(r.final_plan);
    if (r.error)
        j["error"] = *r.error;
    if (r.induced_workflow)
        j["induced_workflow"] = memory::to_json(*r.induced_workflow);
    j["trajectory"] = to_json(r.trajectory);
    return j;
}

EpisodeResult run_episode(const Goal& goal, const std::optional<Plan>& user_plan, const EpisodeConfig& cfg,
                          EpisodeDeps deps)
{
    validate(cfg);
    Emitter emit{deps.sink};
    auto& models = deps.models;
    auto& driver = deps.driver;

    auto const fallback_plan = user_plan.value_or(Plan::user_supplied(goal.text()));
    EpisodeResult result{Trajectory(goal, fallback_plan), fallback_plan, TerminalReason::policy_stop, {}, {}};
    auto fail = [&](const std::string& message) {
        result.reason = TerminalReason::error;
        result.error = message;
        emit(EventKind::error, std::nullopt,
             {{"message", message}, {"steps", result.trajectory.size()}, {"trajectory", to_json(result.trajectory)}});
        return result;
    };

    std::vector<memory::WorkflowMemoryEntry> workflows;
    try {
        if (cfg.memory_enabled && deps.memory)
            workflows = memory::retrieve(goal, deps.memory->snapshot().entries, cfg.memory_top_n);

        Plan initial = result.final_plan;
        if (!user_plan && (is_planning(cfg.kind) || !workflows.empty()))
            initial = generate_initial_plan(goal, workflows, *models.planner, models.config);
        result.trajectory = Trajectory(goal, initial);
        result.final_plan = initial;
        Json listed = Json::array();
        for (auto const& w : workflows)
            listed.push_back(w.task_summary);
        emit(EventKind::plan_generated, std::nullopt, {{"plan", to_json(initial)}, {"workflows", listed}});

        auto start = driver.navigate(goal.starting_url());
        if (!start.ok())
            return fail("initial navigation failed: " + start.message());

        History history;
        Plan latest = initial;
        result.reason = TerminalReason::max_steps;
        for (int step = 0; step < cfg.max_steps; ++step) {
            if (deps.cancel && deps.cancel->load()) {
                result.reason = TerminalReason::cancelled;
                break;
            }
            PolicyContext ctx{goal, initial, &latest, history};
            auto action = next_action(ctx, cfg.kind, *models.policy, grounding::policy_tools(), models.config);
            if (!action) {
                result.reason = TerminalReason::policy_stop;
                break;
            }
            emit(EventKind::action_generated, step, {{"text", action->text()}});

            auto pre_url = driver.current_url();
            auto obs = driver.capture_observation(cfg.grounding_features);
            std::optional<GroundedAction> grounded;
            std::optional<EvaluationRecord> evaluation;
            try {
                grounded = grounding::ground_action({*action, obs, cfg.grounding_features, cfg.element_filter},
                                                    grounding::grounding_tools(), *models.grounding, models.config,
                                                    driver);
                emit(EventKind::action_grounded, step, {{"grounded", to_json(*grounded)}});
            } catch (const grounding::GroundingFailure& e) {
                evaluation = EvaluationRecord::failure(std::string("grounding failed: ") + e.what());
                emit(EventKind::action_grounded, step,
                     {{"grounded", nullptr}, {"error", e.what()}, {"reason", to_string(e.reason())}});
            }

            if (grounded) {
                bool highlighted = false;
                if (cfg.highlight_actions && grounded->selector())
                    highlighted = driver.highlight(*grounded->selector(), action->text());
                evaluation = driver.execute(*grounded);
                if (highlighted)
                    driver.clear_highlight();
            }
            auto post_url = driver.current_url();
            emit(EventKind::action_executed, step,
                 {{"evaluation", to_json(*evaluation)}, {"pre_url", pre_url}, {"post_url", post_url}});
            result.trajectory.append(TrajectoryStep(*action, grounded, *evaluation, pre_url, post_url));
            history.push_back({*action, *evaluation});

            if (grounded && grounded->kind() == ActionKind::finish) {
                result.reason = TerminalReason::finish;
                break;
            }
            bool more = step + 1 < cfg.max_steps;
            if (more && is_planning(cfg.kind) && (step + 1) % cfg.replan_every == 0) {
                std::optional<Observation> page;
                if (cfg.kind == AgentKind::context_aware_planning)
                    page = driver.capture_observation({Feature::interactive_elements, Feature::axtree});
                PolicyContext rctx{goal, initial, &latest, history};
                latest = replan(rctx, latest, cfg.kind, page ? &*page : nullptr, workflows, *models.planner,
                                models.config);
                result.final_plan = latest;
                emit(EventKind::replanned, step, {{"plan", to_json(latest)}});
            }
        }
    } catch (const browser::DriverError& e) {
        return fail(std::string("browser driver failure: ") + e.what());
    } catch (const llm::GatewayError& e) {
        return fail(std::string("model failure: ") + e.what());
    } catch (const PolicyError& e) {
        return fail(e.what());
    }

    if (cfg.memory_enabled && deps.memory) {
        if (auto induced = memory::induce_workflow(result.trajectory)) {
            deps.memory->append(*induced);
            result.induced_workflow = std::move(induced);
        }
    }
    emit(EventKind::done, std::nullopt, episode_summary(result));
    return result;
}

} // namespace webpilot::agents
