// SPDX-License-Identifier: Apache-2.0
#include "webpilot/core/trajectory_io.hpp"

#include "webpilot/core/errors.hpp"

namespace webpilot {

namespace {

// Shape errors inside a syntactically valid document are reported as parse errors;
// value-level problems surface from the type constructors as InvariantViolation.
const Json& field(const Json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key))
        throw ParseError(std::string("missing field '") + key + "'");
    return j.at(key);
}

std::string string_field(const Json& j, const char* key)
{
    auto const& v = field(j, key);
    if (!v.is_string())
        throw ParseError(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

int int_field(const Json& j, const char* key)
{
    auto const& v = field(j, key);
    if (!v.is_number_integer())
        throw ParseError(std::string("field '") + key + "' must be an integer");
    return v.get<int>();
}

std::optional<std::string> optional_string(const Json& j, const char* key)
{
    if (!j.contains(key) || j.at(key).is_null())
        return std::nullopt;
    if (!j.at(key).is_string())
        throw ParseError(std::string("field '") + key + "' must be a string or null");
    return j.at(key).get<std::string>();
}

Json optional_json(const std::optional<std::string>& v) { return v ? Json(*v) : Json(nullptr); }

} // namespace

Json to_json(const Goal& g) { return Json{{"text", g.text()}, {"starting_url", g.starting_url()}}; }

Json to_json(const Plan& p)
{
    return Json{{"text", p.text()}, {"revision", p.revision()}, {"provenance", to_string(p.provenance())}};
}

Json to_json(const GroundedAction& a)
{
    Json args = Json::object();
    for (auto const& [k, v] : a.arguments())
        args[k] = v;
    return Json{{"kind", to_string(a.kind())}, {"selector", optional_json(a.selector())}, {"arguments", args}};
}

Json to_json(const EvaluationRecord& e)
{
    return Json{{"status", to_string(e.status())}, {"message", e.message()}, {"page_summary", e.page_summary()}};
}

Json to_json(const TrajectoryStep& s)
{
    return Json{
        {"action", Json{{"text", s.action().text()}, {"step_index", s.action().step_index()}}},
        {"grounded", s.grounded() ? to_json(*s.grounded()) : Json(nullptr)},
        {"evaluation", to_json(s.evaluation())},
        {"pre_url", s.pre_url()},
        {"post_url", s.post_url()},
    };
}

Json to_json(const ElementInfo& e)
{
    return Json{
        {"tag", e.tag},
        {"id", optional_json(e.id_attr)},
        {"name", optional_json(e.name_attr)},
        {"role", optional_json(e.role)},
        {"aria_label", optional_json(e.aria_label)},
        {"type", optional_json(e.type_attr)},
        {"classes", e.classes},
        {"sibling_index", e.sibling_index},
        {"text", e.text_excerpt},
        {"mark_id", e.mark_id ? Json(*e.mark_id) : Json(nullptr)},
    };
}

Json to_json(const Trajectory& t)
{
    Json steps = Json::array();
    for (auto const& s : t.steps())
        steps.push_back(to_json(s));
    return Json{
        {"version", trajectory_format_version},
        {"goal", to_json(t.goal())},
        {"initial_plan", to_json(t.initial_plan())},
        {"steps", steps},
    };
}

GroundedAction grounded_action_from_json(const Json& j, int source_step)
{
    auto kind = parse_action_kind(string_field(j, "kind"));
    if (!kind)
        throw InvariantViolation("unknown grounded action kind: " + string_field(j, "kind"));
    ActionArguments args;
    if (j.contains("arguments")) {
        auto const& a = j.at("arguments");
        if (!a.is_object())
            throw ParseError("grounded.arguments must be an object");
        for (auto const& [k, v] : a.items()) {
            if (!v.is_string())
                throw ParseError("grounded argument '" + k + "' must be a string");
            args.emplace(k, v.get<std::string>());
        }
    }
    return GroundedAction(*kind, optional_string(j, "selector"), std::move(args), source_step);
}

EvaluationRecord evaluation_from_json(const Json& j)
{
    auto status = string_field(j, "status");
    if (status != "success" && status != "failure")
        throw InvariantViolation("unknown evaluation status: " + status);
    return EvaluationRecord(status == "success" ? EvaluationStatus::success : EvaluationStatus::failure,
                            string_field(j, "message"), string_field(j, "page_summary"));
}

ElementInfo element_info_from_json(const Json& j)
{
    ElementInfo e;
    e.tag = string_field(j, "tag");
    e.id_attr = optional_string(j, "id");
    e.name_attr = optional_string(j, "name");
    e.role = optional_string(j, "role");
    e.aria_label = optional_string(j, "aria_label");
    e.type_attr = optional_string(j, "type");
    if (j.contains("classes"))
        for (auto const& c : j.at("classes"))
            e.classes.push_back(c.get<std::string>());
    e.sibling_index = int_field(j, "sibling_index");
    e.text_excerpt = j.contains("text") ? j.at("text").get<std::string>() : std::string{};
    if (j.contains("mark_id") && !j.at("mark_id").is_null())
        e.mark_id = j.at("mark_id").get<int>();
    validate(e);
    return e;
}

Trajectory trajectory_from_json(const Json& j)
{
    if (!j.is_object())
        throw ParseError("trajectory document must be an object");
    if (int_field(j, "version") != trajectory_format_version)
        throw ParseError("unsupported trajectory version " + std::to_string(int_field(j, "version")));

    auto const& g = field(j, "goal");
    Goal goal(string_field(g, "text"), string_field(g, "starting_url"));

    auto const& p = field(j, "initial_plan");
    auto provenance = parse_plan_provenance(string_field(p, "provenance"));
    if (!provenance)
        throw InvariantViolation("unknown plan provenance: " + string_field(p, "provenance"));
    Plan plan(string_field(p, "text"), int_field(p, "revision"), *provenance);

    auto const& steps_json = field(j, "steps");
    if (!steps_json.is_array())
        throw ParseError("steps must be an array");

    std::vector<TrajectoryStep> steps;
    for (auto const& s : steps_json) {
        auto const& a = field(s, "action");
        ActionDescription action(string_field(a, "text"), int_field(a, "step_index"));
        std::optional<GroundedAction> grounded;
        auto const& gj = field(s, "grounded");
        if (!gj.is_null())
            grounded = grounded_action_from_json(gj, action.step_index());
        steps.emplace_back(std::move(action), std::move(grounded), evaluation_from_json(field(s, "evaluation")),
                           string_field(s, "pre_url"), string_field(s, "post_url"));
    }
    return Trajectory(std::move(goal), std::move(plan), std::move(steps));
}

std::string serialize_trajectory(const Trajectory& t) { return to_json(t).dump(2) + "\n"; }

Trajectory deserialize_trajectory(std::string_view doc)
{
    Json j;
    try {
        j = Json::parse(doc);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("trajectory document is not valid JSON: ") + e.what());
    }
    try {
        return trajectory_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("trajectory document has unexpected shape: ") + e.what());
    }
}

} // namespace webpilot
