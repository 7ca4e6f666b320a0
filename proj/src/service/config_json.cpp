// SPDX-License-Identifier: Apache-2.0
#include "webpilot/service/config_json.hpp"

namespace webpilot::service {

namespace {

template <typename T>
T field(const Json& j, const char* key, T fallback)
{
    if (!j.contains(key) || j[key].is_null())
        return fallback;
    try {
        return j[key].get<T>();
    } catch (const Json::exception&) {
        throw ParseError(std::string("field '") + key + "' has the wrong type");
    }
}

void require_object(const Json& j, const char* what)
{
    if (!j.is_object())
        throw ParseError(std::string(what) + " must be a JSON object");
}

FeatureSet features_field(const Json& j, const char* key, FeatureSet fallback)
{
    if (!j.contains(key) || j[key].is_null())
        return fallback;
    auto const& v = j[key];
    if (v.is_string())
        return FeatureSet::parse(v.get<std::string>());
    if (!v.is_array())
        throw ParseError(std::string("field '") + key + "' must be a list of feature names");
    FeatureSet out;
    for (auto const& item : v) {
        if (!item.is_string())
            throw ParseError(std::string("field '") + key + "' must be a list of feature names");
        auto f = parse_feature(item.get<std::string>());
        if (!f)
            throw ParseError("unknown observation feature: " + item.get<std::string>());
        out.insert(*f);
    }
    return out;
}

grounding::ElementFilter filter_field(const Json& j, grounding::ElementFilter fallback)
{
    if (!j.contains("element_filter") || j["element_filter"].is_null())
        return fallback;
    auto const& f = j["element_filter"];
    require_object(f, "element_filter");
    grounding::ElementFilter out;
    for (auto const& t : field<std::vector<std::string>>(f, "tags", {}))
        out.tags.insert(t);
    for (auto const& r : field<std::vector<std::string>>(f, "roles", {}))
        out.roles.insert(r);
    return out;
}

Json features_json(FeatureSet s)
{
    Json out = Json::array();
    for (auto f : s.list())
        out.push_back(to_string(f));
    return out;
}

Json filter_json(const grounding::ElementFilter& f)
{
    return {{"tags", f.tags}, {"roles", f.roles}};
}

Json feature_names()
{
    Json out = Json::array();
    for (auto f : {Feature::axtree, Feature::dom, Feature::screenshot, Feature::som, Feature::interactive_elements})
        out.push_back(to_string(f));
    return out;
}

Json describe(const char* type, Json default_value, Json values = nullptr)
{
    Json j{{"type", type}, {"default", std::move(default_value)}};
    if (!values.is_null())
        j["values"] = std::move(values);
    return j;
}

} // namespace

browser::BrowserEnvironmentConfig browser_config_from_json(const Json& j, browser::BrowserEnvironmentConfig base)
{
    require_object(j, "browser config");
    auto out = std::move(base);
    if (j.contains("mode")) {
        auto mode = browser::parse_browser_mode(field<std::string>(j, "mode", ""));
        if (!mode)
            throw ParseError("unknown browser mode: " + j["mode"].dump());
        out.mode = *mode;
    }
    if (j.contains("endpoint"))
        out.endpoint = j["endpoint"].is_null() ? std::nullopt : std::optional(field<std::string>(j, "endpoint", ""));
    out.headless = field(j, "headless", out.headless);
    out.executable = field(j, "executable", out.executable);
    if (j.contains("viewport")) {
        require_object(j["viewport"], "viewport");
        out.viewport.width = field(j["viewport"], "width", out.viewport.width);
        out.viewport.height = field(j["viewport"], "height", out.viewport.height);
    }
    try {
        browser::validate(out);
    } catch (const InvariantViolation& e) {
        throw PreconditionError(e.what());
    }
    return out;
}

agents::EpisodeConfig episode_config_from_json(const Json& j, agents::EpisodeConfig base)
{
    require_object(j, "episode config");
    auto out = std::move(base);
    if (j.contains("agent")) {
        auto kind = agents::parse_agent_kind(field<std::string>(j, "agent", ""));
        if (!kind)
            throw ParseError("unknown agent kind: " + j["agent"].dump());
        out.kind = *kind;
    }
    out.max_steps = field(j, "max_steps", out.max_steps);
    out.grounding_features = features_field(j, "grounding_features", out.grounding_features);
    out.element_filter = filter_field(j, out.element_filter);
    out.replan_every = field(j, "replan_every", out.replan_every);
    out.memory_enabled = field(j, "memory_enabled", out.memory_enabled);
    out.memory_top_n = field(j, "memory_top_n", out.memory_top_n);
    out.highlight_actions = field(j, "highlight_actions", out.highlight_actions);
    agents::validate(out);
    return out;
}

search::SearchConfig search_config_from_json(const Json& j, search::SearchConfig base)
{
    require_object(j, "search config");
    auto out = std::move(base);
    if (j.contains("strategy")) {
        auto s = search::parse_strategy(field<std::string>(j, "strategy", ""));
        if (!s)
            throw ParseError("unknown search strategy: " + j["strategy"].dump());
        out.strategy = *s;
    }
    out.branching = field(j, "branching", out.branching);
    out.max_depth = field(j, "max_depth", out.max_depth);
    out.iterations = field(j, "iterations", out.iterations);
    out.exploration = field(j, "exploration", out.exploration);
    out.sample_temperature = field(j, "sample_temperature", out.sample_temperature);
    out.value_threshold = field(j, "value_threshold", out.value_threshold);
    out.grounding_features = features_field(j, "grounding_features", out.grounding_features);
    out.element_filter = filter_field(j, out.element_filter);
    search::validate(out);
    return out;
}

Json to_json(const browser::BrowserEnvironmentConfig& c)
{
    return {{"mode", to_string(c.mode)},
            {"endpoint", c.endpoint ? Json(*c.endpoint) : Json(nullptr)},
            {"headless", c.headless},
            {"viewport", {{"width", c.viewport.width}, {"height", c.viewport.height}}}};
}

Json to_json(const agents::EpisodeConfig& c)
{
    return {{"agent", to_string(c.kind)},
            {"max_steps", c.max_steps},
            {"grounding_features", features_json(c.grounding_features)},
            {"element_filter", filter_json(c.element_filter)},
            {"replan_every", c.replan_every},
            {"memory_enabled", c.memory_enabled},
            {"memory_top_n", c.memory_top_n},
            {"highlight_actions", c.highlight_actions}};
}

Json to_json(const search::SearchConfig& c)
{
    return {{"strategy", to_string(c.strategy)},
            {"branching", c.branching},
            {"max_depth", c.max_depth},
            {"iterations", c.iterations},
            {"exploration", c.exploration},
            {"sample_temperature", c.sample_temperature},
            {"value_threshold", c.value_threshold},
            {"grounding_features", features_json(c.grounding_features)},
            {"element_filter", filter_json(c.element_filter)}};
}

Instruction instruction_from_json(const Json& j, const agents::EpisodeConfig& episode_defaults)
{
    require_object(j, "instruction");
    if (j.contains("episode") && j.contains("search"))
        throw PreconditionError("an instruction takes either an episode or a search config, not both");
    auto goal_text = field<std::string>(j, "goal", "");
    auto url = field<std::string>(j, "url", "");
    try {
        Instruction out{Goal(goal_text, url), std::nullopt, episode_defaults};
        if (auto plan = field<std::string>(j, "plan", ""); !plan.empty())
            out.plan = Plan::user_supplied(plan);
        if (j.contains("search"))
            out.run = search_config_from_json(j["search"]);
        else if (j.contains("episode"))
            out.run = episode_config_from_json(j["episode"], episode_defaults);
        return out;
    } catch (const InvariantViolation& e) {
        throw PreconditionError(e.what());
    }
}

Json config_schema()
{
    agents::EpisodeConfig episode;
    search::SearchConfig search;
    browser::BrowserEnvironmentConfig browser;
    return {
        {"browser",
         {{"mode", describe("enum", to_string(browser.mode), {"launch_local", "attach_cdp", "remote_endpoint"})},
          {"endpoint", describe("string?", nullptr)},
          {"headless", describe("boolean", browser.headless)},
          {"viewport", describe("object", {{"width", browser.viewport.width}, {"height", browser.viewport.height}})}}},
        {"instruction",
         {{"goal", describe("string", "")}, {"url", describe("string", "")}, {"plan", describe("string?", nullptr)}}},
        {"episode",
         {{"agent", describe("enum", to_string(episode.kind),
                             {"function_calling", "high_level_planning", "context_aware_planning", "prompt"})},
          {"max_steps", describe("integer", episode.max_steps)},
          {"grounding_features", describe("feature[]", features_json(episode.grounding_features), feature_names())},
          {"element_filter", describe("object", filter_json(episode.element_filter))},
          {"replan_every", describe("integer", episode.replan_every)},
          {"memory_enabled", describe("boolean", episode.memory_enabled)},
          {"memory_top_n", describe("integer", episode.memory_top_n)},
          {"highlight_actions", describe("boolean", episode.highlight_actions)}}},
        {"search",
         {{"strategy", describe("enum", to_string(search.strategy), {"bfs", "dfs", "mcts"})},
          {"branching", describe("integer", search.branching)},
          {"max_depth", describe("integer", search.max_depth)},
          {"iterations", describe("integer", search.iterations)},
          {"exploration", describe("number", search.exploration)},
          {"sample_temperature", describe("number", search.sample_temperature)},
          {"value_threshold", describe("number", search.value_threshold)},
          {"grounding_features", describe("feature[]", features_json(search.grounding_features), feature_names())},
          {"element_filter", describe("object", filter_json(search.element_filter))}}},
    };
}

} // namespace webpilot::service
