// SPDX-License-Identifier: Apache-2.0
#include "webpilot/browser/page_driver.hpp"

namespace webpilot::browser {

std::string_view to_string(BrowserMode m)
{
    switch (m) {
    case BrowserMode::launch_local: return "launch_local";
    case BrowserMode::attach_cdp: return "attach_cdp";
    case BrowserMode::remote_endpoint: return "remote_endpoint";
    }
    return "launch_local";
}

std::optional<BrowserMode> parse_browser_mode(std::string_view s)
{
    for (auto m : {BrowserMode::launch_local, BrowserMode::attach_cdp, BrowserMode::remote_endpoint})
        if (to_string(m) == s)
            return m;
    return std::nullopt;
}

void validate(const BrowserEnvironmentConfig& cfg)
{
    bool has_endpoint = cfg.endpoint && !cfg.endpoint->empty();
    if (cfg.mode == BrowserMode::launch_local && has_endpoint)
        throw InvariantViolation("launch_local takes no endpoint");
    if (cfg.mode != BrowserMode::launch_local && !has_endpoint)
        throw InvariantViolation(std::string(to_string(cfg.mode)) + " requires an endpoint");
    if (cfg.viewport.width <= 0 || cfg.viewport.height <= 0)
        throw InvariantViolation("viewport dimensions must be positive");
    if (cfg.handshake_timeout.count() <= 0)
        throw InvariantViolation("handshake timeout must be positive");
}

} // namespace webpilot::browser
