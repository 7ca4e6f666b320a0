// SPDX-License-Identifier: Apache-2.0
#include "webpilot/grounding/grounding.hpp"

#include "webpilot/replay/selector.hpp"

#include <json.hpp>

#include <charconv>

namespace webpilot::grounding {

using llm::ChatMessage;
using llm::ParameterType;
using llm::ToolParameter;
using llm::ToolSchema;

namespace {

ToolParameter param(std::string name, ParameterType type, std::string description, bool required = false)
{
    return {std::move(name), type, std::move(description), required};
}

std::vector<ToolSchema> build_tools(bool by_mark)
{
    auto target = by_mark ? param("mark", ParameterType::integer, "Number of the marked element to act on", true)
                          : param("target", ParameterType::string, "Plain description of the element");
    auto optional_target = target;
    optional_target.required = false;
    auto with_target = [&](ToolSchema s, bool required) {
        s.parameters.insert(s.parameters.begin(), required ? target : optional_target);
        if (!by_mark)
            s.parameters.insert(s.parameters.begin() + 1,
                                param("mark", ParameterType::integer, "Mark number, if the target is marked"));
        return s;
    };
    std::vector<ToolSchema> tools;
    tools.push_back({"navigate", "Open a URL in the current tab",
                     {param("url", ParameterType::string, "Absolute URL", true)}});
    tools.push_back(with_target({"click", "Click an element", {}}, true));
    tools.push_back(with_target(
        {"fill", "Type text into an input field", {param("value", ParameterType::string, "Text to enter", true)}},
        true));
    tools.push_back(with_target({"select_option",
                                 "Choose an option in a dropdown",
                                 {param("value", ParameterType::string, "Option value or label", true)}},
                                true));
    tools.push_back(with_target({"scroll",
                                 "Scroll the page, or a scrollable element",
                                 {param("direction", ParameterType::string, "up, down, left or right", true)}},
                                false));
    tools.push_back(with_target(
        {"upload_file", "Attach a file to a file input", {param("path", ParameterType::string, "Local file path", true)}},
        true));
    tools.push_back(with_target({"scrape", "Read the text of the page or of one element", {}}, false));
    tools.push_back({"go_back", "Go back to the previous page", {}});
    tools.push_back({"finish", "Declare the task complete",
                     {param("answer", ParameterType::string, "Final answer, if the task asks for one")}});
    return tools;
}

constexpr const char* grounding_system =
    "You turn one natural-language browser action into exactly one tool call. Elements on the page "
    "carry numbered marks; target them by mark. Do not plan further steps.";

std::optional<int> parse_mark(const std::string& s)
{
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        return std::nullopt;
    return v;
}

} // namespace

const std::vector<ToolSchema>& policy_tools()
{
    static const auto tools = build_tools(false);
    return tools;
}

const std::vector<ToolSchema>& grounding_tools()
{
    static const auto tools = build_tools(true);
    return tools;
}

FeatureSet default_grounding_features()
{
    return {Feature::interactive_elements, Feature::som, Feature::screenshot};
}

bool ElementFilter::allows(const ElementInfo& e) const
{
    if (!tags.empty() && tags.contains(e.tag))
        return true;
    if (!roles.empty() && e.role && roles.contains(*e.role))
        return true;
    return empty();
}

std::string render_element(const ElementInfo& e)
{
    std::string out = "[" + (e.mark_id ? std::to_string(*e.mark_id) : std::string("-")) + "] " + e.tag;
    auto attr = [&](const char* name, const std::optional<std::string>& v) {
        if (v && !v->empty())
            out += std::string(" ") + name + "=" + nlohmann::json(*v).dump();
    };
    if (e.id_attr && !e.id_attr->empty())
        out += " #" + *e.id_attr;
    attr("name", e.name_attr);
    attr("role", e.role);
    attr("aria-label", e.aria_label);
    attr("type", e.type_attr);
    if (!e.text_excerpt.empty())
        out += " " + nlohmann::json(e.text_excerpt).dump();
    return out;
}

std::vector<ChatMessage> grounding_prompt(const ActionDescription& action, const Observation& obs, FeatureSet flags,
                                          const ElementFilter& filter)
{
    if (!flags.subset_of(obs.features()))
        throw PreconditionError("grounding flags " + flags.to_string() + " exceed observation features "
                                + obs.features().to_string());
    std::string body = "Current URL: " + obs.url() + "\n\n";
    if (flags.contains(Feature::interactive_elements)) {
        body += "[[interactive_elements]]\n";
        for (auto const& e : *obs.interactive_elements())
            if (filter.allows(e))
                body += render_element(e) + "\n";
        body += "\n";
    }
    if (flags.contains(Feature::axtree))
        body += "[[axtree]]\n" + *obs.axtree_text() + "\n";
    if (flags.contains(Feature::dom)) {
        body += "[[dom]]\n" + *obs.dom_snapshot() + "\n";
        if (obs.dom_truncated())
            body += "(truncated)\n";
        body += "\n";
    }
    bool image = flags.contains(Feature::screenshot) && obs.screenshot() && !obs.screenshot()->empty();
    if (image) {
        body += "[[screenshot]]\nThe attached screenshot shows the viewport";
        body += flags.contains(Feature::som) ? " with numbered marks drawn on the elements.\n\n" : ".\n\n";
    }
    body += "Action: " + action.text() + "\n";

    auto user = ChatMessage::user(std::move(body));
    if (image)
        user.images.push_back(*obs.screenshot());
    return {ChatMessage::system(grounding_system), std::move(user)};
}

std::string_view to_string(GroundingFailure::Reason r)
{
    switch (r) {
    case GroundingFailure::Reason::text_reply: return "text_reply";
    case GroundingFailure::Reason::unresolvable_target: return "unresolvable_target";
    case GroundingFailure::Reason::protocol: return "protocol";
    }
    return "protocol";
}

GroundedAction ground_action(const GroundingRequest& req, const std::vector<ToolSchema>& tools, llm::ChatModel& model,
                             const llm::ModelConfig& cfg, browser::PageDriver& driver)
{
    auto const& obs = req.observation;
    if (!obs.features().contains(Feature::interactive_elements) && !obs.features().contains(Feature::axtree)
        && !obs.features().contains(Feature::dom))
        throw PreconditionError("grounding needs interactive_elements, axtree or dom in the observation");
    for (auto kind : all_action_kinds)
        if (std::none_of(tools.begin(), tools.end(), [&](const ToolSchema& t) { return t.name == to_string(kind); }))
            throw PreconditionError("grounding tools do not cover action kind " + std::string(to_string(kind)));

    auto messages = grounding_prompt(req.action, obs, req.flags, req.filter);
    std::optional<llm::ToolCall> call;
    for (int attempt = 0; attempt < 2 && !call; ++attempt) {
        std::string problem;
        try {
            auto reply = model.complete_with_tools(messages, tools, cfg);
            if (reply.is_text())
                throw GroundingFailure(GroundingFailure::Reason::text_reply,
                                       "grounding model replied with text instead of a tool call: " + reply.text);
            if (reply.calls.size() == 1)
                call = reply.calls.front();
            else
                problem = "expected exactly one tool call, got " + std::to_string(reply.calls.size());
        } catch (const llm::ToolSchemaError& e) {
            problem = e.what();
        } catch (const llm::ToolArgumentError& e) {
            problem = e.what();
        }
        if (!call) {
            if (attempt == 1)
                throw GroundingFailure(GroundingFailure::Reason::protocol, "grounding protocol failure: " + problem);
            messages.push_back(ChatMessage::assistant("(invalid tool call)"));
            messages.push_back(ChatMessage::user("Your previous reply was rejected: " + problem
                                                 + ". Reply with exactly one valid tool call."));
        }
    }

    auto kind = parse_action_kind(call->name);
    ActionArguments args;
    std::optional<int> mark;
    for (auto const& [key, value] : call->arguments) {
        if (key == "mark") {
            mark = parse_mark(value);
            if (!mark)
                throw GroundingFailure(GroundingFailure::Reason::protocol, "mark is not an integer: " + value);
        } else {
            args[key] = value;
        }
    }

    std::optional<std::string> selector;
    if (mark) {
        if (!obs.has_mark(*mark))
            throw GroundingFailure(GroundingFailure::Reason::unresolvable_target,
                                   "mark " + std::to_string(*mark) + " is not in the observation");
        try {
            selector = driver.selector_for_mark(*mark);
        } catch (const browser::UnresolvedTarget& e) {
            throw GroundingFailure(GroundingFailure::Reason::unresolvable_target, e.what());
        } catch (const replay::SelectorError& e) {
            throw GroundingFailure(GroundingFailure::Reason::unresolvable_target, e.what());
        }
    }
    try {
        return GroundedAction(*kind, std::move(selector), std::move(args), req.action.step_index());
    } catch (const InvariantViolation& e) {
        throw GroundingFailure(GroundingFailure::Reason::protocol, std::string("invalid grounded action: ") + e.what());
    }
}

} // namespace webpilot::grounding
