// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/core/errors.hpp"
#include "webpilot/core/types.hpp"

#include <json.hpp>

#include <string>
#include <string_view>

namespace webpilot {

using Json = nlohmann::ordered_json;

inline constexpr int trajectory_format_version = 1;

/// Canonical trajectory document: UTF-8 JSON with a fixed key order.
std::string serialize_trajectory(const Trajectory& t);

/// Throws ParseError for malformed documents and InvariantViolation for documents
/// that parse but describe an invalid trajectory.
Trajectory deserialize_trajectory(std::string_view doc);

Json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const Json& j);

Json to_json(const Goal& g);
Json to_json(const Plan& p);
Json to_json(const GroundedAction& a);
Json to_json(const EvaluationRecord& e);
Json to_json(const TrajectoryStep& s);
Json to_json(const ElementInfo& e);

GroundedAction grounded_action_from_json(const Json& j, int source_step);
EvaluationRecord evaluation_from_json(const Json& j);
ElementInfo element_info_from_json(const Json& j);

} // namespace webpilot
