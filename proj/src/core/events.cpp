// SPDX-License-Identifier: Apache-2.0
#include "webpilot/core/events.hpp"

#include <cstdio>
#include <ctime>

namespace webpilot {

namespace {

constexpr EventKind all_kinds[] = {
    EventKind::plan_generated, EventKind::action_generated, EventKind::action_grounded, EventKind::action_executed,
    EventKind::replanned,      EventKind::search_progress,  EventKind::done,            EventKind::error,
};

} // namespace

std::string_view to_string(EventKind k)
{
    switch (k) {
    case EventKind::plan_generated: return "plan_generated";
    case EventKind::action_generated: return "action_generated";
    case EventKind::action_grounded: return "action_grounded";
    case EventKind::action_executed: return "action_executed";
    case EventKind::replanned: return "replanned";
    case EventKind::search_progress: return "search_progress";
    case EventKind::done: return "done";
    case EventKind::error: return "error";
    }
    return "error";
}

std::optional<EventKind> parse_event_kind(std::string_view s)
{
    for (auto k : all_kinds)
        if (to_string(k) == s)
            return k;
    return std::nullopt;
}

std::string format_timestamp(std::chrono::system_clock::time_point t)
{
    using namespace std::chrono;
    auto ms = duration_cast<milliseconds>(t.time_since_epoch()).count();
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    if (ms % 1000 < 0)
        --secs;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(((ms % 1000) + 1000) % 1000));
    return buf;
}

std::optional<std::chrono::system_clock::time_point> parse_timestamp(std::string_view s)
{
    std::tm tm{};
    int millis = 0;
    std::string text(s);
    int n = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ", &tm.tm_year, &tm.tm_mon, &tm.tm_mday,
                        &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &millis);
    if (n < 6)
        return std::nullopt;
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    auto secs = timegm(&tm);
    return std::chrono::system_clock::time_point(std::chrono::seconds(secs)) + std::chrono::milliseconds(millis);
}

Json to_json(const StepEvent& e)
{
    Json j;
    j["seq"] = e.seq;
    j["kind"] = to_string(e.kind);
    j["step_index"] = e.step_index ? Json(*e.step_index) : Json(nullptr);
    j["payload"] = e.payload;
    j["at"] = format_timestamp(e.at);
    return j;
}

StepEvent step_event_from_json(const Json& j)
{
    try {
        StepEvent e;
        e.seq = j.at("seq").get<long>();
        auto kind = parse_event_kind(j.at("kind").get<std::string>());
        if (!kind)
            throw ParseError("unknown event kind " + j.at("kind").get<std::string>());
        e.kind = *kind;
        if (j.contains("step_index") && !j["step_index"].is_null())
            e.step_index = j["step_index"].get<int>();
        e.payload = j.value("payload", Json::object());
        if (auto at = parse_timestamp(j.value("at", "")))
            e.at = *at;
        return e;
    } catch (const Json::exception& ex) {
        throw ParseError(std::string("malformed event: ") + ex.what());
    }
}

} // namespace webpilot
