// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/browser/page_driver.hpp"
#include "webpilot/llm/chat_model.hpp"

#include <set>
#include <string>
#include <vector>

namespace webpilot::grounding {

/// Tools offered to the action-generation policy. Same nine names as the grounding tools, but
/// targets are free-form descriptions: the policy never sees marks or selectors.
const std::vector<llm::ToolSchema>& policy_tools();

/// Tools offered to the grounding model. Elements are targeted by SOM mark number.
const std::vector<llm::ToolSchema>& grounding_tools();

/// {interactive_elements, som, screenshot}
FeatureSet default_grounding_features();

/// Allowlist applied to the interactive-element list before prompt assembly. Empty sets allow all.
struct ElementFilter {
    std::set<std::string> tags;
    std::set<std::string> roles;

    bool empty() const { return tags.empty() && roles.empty(); }
    bool allows(const ElementInfo& e) const;
};

/// One line per element: `[mark] tag #id name=".." role=".." type=".." "text"`.
std::string render_element(const ElementInfo& e);

/// System instructions, then one user message holding the selected feature sections in fixed
/// order (interactive_elements, axtree, dom, screenshot) followed by the action. The screenshot,
/// when selected, is attached to that final user message. Deterministic.
std::vector<llm::ChatMessage> grounding_prompt(const ActionDescription& action, const Observation& obs,
                                               FeatureSet flags, const ElementFilter& filter = {});

class GroundingFailure : public Error {
public:
    enum class Reason { text_reply, unresolvable_target, protocol };

    GroundingFailure(Reason reason, const std::string& message) : Error(message), reason_(reason) {}
    Reason reason() const { return reason_; }

private:
    Reason reason_;
};

std::string_view to_string(GroundingFailure::Reason r);

struct GroundingRequest {
    const ActionDescription& action;
    const Observation& observation;
    FeatureSet flags;
    ElementFilter filter;
};

/// Asks `model` for exactly one grounding tool call and converts it into a GroundedAction.
/// Marks are resolved through `driver.selector_for_mark`, which must reflect the page `obs` was
/// captured from. A wrong tool count or an invalid call gets one corrective re-prompt.
GroundedAction ground_action(const GroundingRequest& req, const std::vector<llm::ToolSchema>& tools,
                             llm::ChatModel& model, const llm::ModelConfig& cfg, browser::PageDriver& driver);

} // namespace webpilot::grounding
