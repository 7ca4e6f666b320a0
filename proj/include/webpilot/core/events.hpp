// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/core/trajectory_io.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <string_view>

namespace webpilot {

enum class EventKind {
    plan_generated,
    action_generated,
    action_grounded,
    action_executed,
    replanned,
    search_progress,
    done,
    error,
};

std::string_view to_string(EventKind k);
std::optional<EventKind> parse_event_kind(std::string_view s);
inline bool is_terminal(EventKind k) { return k == EventKind::done || k == EventKind::error; }

struct StepEvent {
    long seq = 0;
    EventKind kind = EventKind::done;
    std::optional<int> step_index;
    Json payload = Json::object();
    std::chrono::system_clock::time_point at;
};

Json to_json(const StepEvent& e);
StepEvent step_event_from_json(const Json& j);

/// Receives events as they happen. The receiver assigns sequence numbers and timestamps.
using EventSink = std::function<void(EventKind kind, std::optional<int> step_index, Json payload)>;

/// ISO-8601 UTC with millisecond precision, e.g. 2024-05-01T12:00:00.250Z.
std::string format_timestamp(std::chrono::system_clock::time_point t);
std::optional<std::chrono::system_clock::time_point> parse_timestamp(std::string_view s);

} // namespace webpilot
