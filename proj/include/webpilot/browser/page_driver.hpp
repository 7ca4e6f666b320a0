// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/browser/cdp_connection.hpp"
#include "webpilot/core/types.hpp"

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace webpilot::browser {

enum class BrowserMode { launch_local, attach_cdp, remote_endpoint };

std::string_view to_string(BrowserMode m);
std::optional<BrowserMode> parse_browser_mode(std::string_view s);

struct Viewport {
    int width = 1280;
    int height = 720;
};

struct BrowserEnvironmentConfig {
    BrowserMode mode = BrowserMode::launch_local;
    std::optional<std::string> endpoint;   // ws:// or http:// DevTools endpoint
    bool headless = true;
    Viewport viewport;
    std::string executable;                // launch_local only; empty to auto-locate
    std::chrono::milliseconds handshake_timeout = std::chrono::seconds(10);
};

void validate(const BrowserEnvironmentConfig& cfg);

struct BrowserSession {
    std::string session_id;
    BrowserEnvironmentConfig config;
    std::optional<std::string> live_view_url;
};

/// A selector-bearing action named no element, or several.
class UnresolvedTarget : public Error {
public:
    using Error::Error;
};

/// The browser surface agents, grounding, replay and search depend on. Page-level failures
/// come back as EvaluationRecords; only driver loss throws (DriverError).
class PageDriver {
public:
    virtual ~PageDriver() = default;

    virtual const BrowserSession& session() const = 0;

    virtual EvaluationRecord navigate(std::string_view url) = 0;
    virtual Observation capture_observation(FeatureSet features) = 0;
    virtual EvaluationRecord execute(const GroundedAction& action) = 0;

    /// Outlines the element and shows `note` beside it. Returns false, changing nothing,
    /// when the selector does not resolve to exactly one element.
    virtual bool highlight(std::string_view selector, std::string_view note) = 0;
    virtual void clear_highlight() = 0;

    virtual ImageHandle screenshot() = 0;
    virtual std::string current_url() = 0;

    /// Unique selector for the element carrying `mark_id` in the latest observation.
    /// Throws UnresolvedTarget when the mark is unknown or its element has been detached.
    virtual std::string selector_for_mark(int mark_id) = 0;
};

inline constexpr std::size_t dom_snapshot_cap_bytes = 500 * 1024;

} // namespace webpilot::browser
