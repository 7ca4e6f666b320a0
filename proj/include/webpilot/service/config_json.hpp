// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/agents/agents.hpp"
#include "webpilot/search/tree_search.hpp"

#include <variant>

namespace webpilot::service {

// Request-body decoding. Every parser throws ParseError for wrong types or unknown enum
// names and PreconditionError for values the component validators reject.

browser::BrowserEnvironmentConfig browser_config_from_json(const Json& j, browser::BrowserEnvironmentConfig base = {});
agents::EpisodeConfig episode_config_from_json(const Json& j, agents::EpisodeConfig base = {});
search::SearchConfig search_config_from_json(const Json& j, search::SearchConfig base = {});

Json to_json(const browser::BrowserEnvironmentConfig& c);
Json to_json(const agents::EpisodeConfig& c);
Json to_json(const search::SearchConfig& c);

struct Instruction {
    Goal goal;
    std::optional<Plan> plan;
    std::variant<agents::EpisodeConfig, search::SearchConfig> run;

    bool is_search() const { return std::holds_alternative<search::SearchConfig>(run); }
};

/// `{goal, url, plan?, episode? | search?}`; giving both `episode` and `search` is malformed.
Instruction instruction_from_json(const Json& j, const agents::EpisodeConfig& episode_defaults = {});

/// Accepted fields, their types, enum values and defaults, for clients that build forms from it.
Json config_schema();

} // namespace webpilot::service
