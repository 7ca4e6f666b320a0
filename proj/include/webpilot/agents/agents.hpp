// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/browser/page_driver.hpp"
#include "webpilot/core/events.hpp"
#include "webpilot/grounding/grounding.hpp"
#include "webpilot/llm/providers.hpp"
#include "webpilot/memory/workflow_memory.hpp"

#include <atomic>
#include <optional>
#include <string>
#include <vector>

namespace webpilot::agents {

enum class AgentKind { function_calling, high_level_planning, context_aware_planning, prompt };

std::string_view to_string(AgentKind k);
std::optional<AgentKind> parse_agent_kind(std::string_view s);
inline bool is_planning(AgentKind k)
{
    return k == AgentKind::high_level_planning || k == AgentKind::context_aware_planning;
}

struct EpisodeConfig {
    AgentKind kind = AgentKind::function_calling;
    int max_steps = 20;
    FeatureSet grounding_features = grounding::default_grounding_features();
    grounding::ElementFilter element_filter;
    int replan_every = 1;
    bool memory_enabled = false;
    std::size_t memory_top_n = 3;
    bool highlight_actions = true;   // pre-action explanatory highlight
};

void validate(const EpisodeConfig& cfg);

struct HistoryItem {
    ActionDescription action;
    EvaluationRecord evaluation;
};
using History = std::vector<HistoryItem>;

/// Everything the action-generation policy may see. Deliberately holds no Observation.
struct PolicyContext {
    const Goal& goal;
    const Plan& initial_plan;
    const Plan* current_plan = nullptr;   // latest replanned x_t, if any
    const History& history;
};

/// Malformed output from a prompt policy after its one re-prompt.
class PolicyError : public Error {
public:
    using Error::Error;
};

/// Fixed template: `navigate <url>`, `click element [3]`, `fill "Email" with "a@b.c"`, `scroll down`.
std::string render_action(const llm::ToolCall& call);

/// Policy prompt: plan(s) and the (action, evaluation) history. Never page content.
std::vector<llm::ChatMessage> policy_prompt(const PolicyContext& ctx, AgentKind kind);

/// `workflows` may be empty; when not, they are listed under "Relevant workflows" in order.
Plan generate_initial_plan(const Goal& goal, const std::vector<memory::WorkflowMemoryEntry>& workflows,
                           llm::ChatModel& model, const llm::ModelConfig& cfg);

/// Function-calling kinds: a tool call renders to Some(action); plain text means stop.
/// Prompt kind: the reply up to the FINISH token; FINISH alone means stop.
std::optional<ActionDescription> next_action(const PolicyContext& ctx, AgentKind kind, llm::ChatModel& model,
                                             const std::vector<llm::ToolSchema>& tools, const llm::ModelConfig& cfg);

/// Returns `latest.revised(...)`. Context-aware planning requires `observation`.
Plan replan(const PolicyContext& ctx, const Plan& latest, AgentKind kind, const Observation* observation,
            const std::vector<memory::WorkflowMemoryEntry>& workflows, llm::ChatModel& model,
            const llm::ModelConfig& cfg);

/// Page context handed to context-aware replanning: URL, element list and AXTree when present.
std::string render_observation_for_planner(const Observation& obs);

enum class TerminalReason { policy_stop, max_steps, finish, cancelled, error };
std::string_view to_string(TerminalReason r);

struct EpisodeResult {
    Trajectory trajectory;
    Plan final_plan;
    TerminalReason reason = TerminalReason::policy_stop;
    std::optional<std::string> error;
    std::optional<memory::WorkflowMemoryEntry> induced_workflow;
};

struct EpisodeDeps {
    browser::PageDriver& driver;
    llm::ModelSet& models;
    memory::WorkflowStore* memory = nullptr;
    EventSink sink;
    const std::atomic<bool>* cancel = nullptr;
};

/// Navigates to the starting URL, then loops generate, ground, highlight, execute until the
/// policy stops, a finish action runs, or max_steps is reached. Emits plan_generated first
/// and exactly one terminal event (done or error) last.
EpisodeResult run_episode(const Goal& goal, const std::optional<Plan>& user_plan, const EpisodeConfig& cfg,
                          EpisodeDeps deps);

/// Summary payload of the terminal done event.
Json episode_summary(const EpisodeResult& r);

} // namespace webpilot::agents
