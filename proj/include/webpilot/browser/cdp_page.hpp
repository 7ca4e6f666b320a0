// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/browser/cdp_connection.hpp"
#include "webpilot/browser/launcher.hpp"
#include "webpilot/browser/page_driver.hpp"

#include <atomic>
#include <memory>
#include <mutex>

namespace webpilot::browser {

/// Resolves an http:// DevTools address to its browser WebSocket URL; ws:// URLs pass through.
std::string resolve_ws_endpoint(const std::string& endpoint, std::chrono::milliseconds timeout);

/// PageDriver over a raw CDP connection to one page target.
class CdpPage : public PageDriver {
public:
    /// Launches, attaches or connects per `cfg`, attaches to a page target (flattened
    /// session) and enables the Page, DOM and Runtime domains.
    static std::unique_ptr<CdpPage> open(const BrowserEnvironmentConfig& cfg);
    ~CdpPage() override;

    const BrowserSession& session() const override { return session_; }

    EvaluationRecord navigate(std::string_view url) override;
    Observation capture_observation(FeatureSet features) override;
    EvaluationRecord execute(const GroundedAction& action) override;
    bool highlight(std::string_view selector, std::string_view note) override;
    void clear_highlight() override;
    ImageHandle screenshot() override;
    std::string current_url() override;
    std::string selector_for_mark(int mark_id) override;

    /// Unique selector for the element `css` currently resolves to (which must be exactly one).
    std::string selector_for_query(const std::string& css);

    /// Number of elements `css` matches in the current document; -1 for an invalid selector.
    int count_matches(const std::string& css);

    /// True when both selectors resolve to exactly one element, and it is the same element.
    bool same_element(const std::string& css_a, const std::string& css_b);

    /// Serialized document with injected overlays, scripts and styles removed.
    std::string dom_snapshot();

    /// Raw outerHTML of the document element, overlays included.
    std::string raw_html();

    /// Runs `expression` in the page and returns its JSON value.
    nlohmann::json evaluate(const std::string& expression);

    CdpConnection& connection() { return *connection_; }
    const std::string& target_session() const { return target_session_; }

private:
    CdpPage() = default;

    nlohmann::json command(const std::string& method, nlohmann::json params = nlohmann::json::object(),
                           std::chrono::milliseconds timeout = std::chrono::seconds(30));
    void wait_for_load(int loads_before, std::chrono::steady_clock::time_point started);
    void settle_after_action(int starts_before);
    std::string page_summary();
    std::string selector_for_expression(const std::string& element_expr);
    std::string axtree_text();
    EvaluationRecord run_element_action(const GroundedAction& action);
    EvaluationRecord upload_file(const GroundedAction& action);
    EvaluationRecord go_back();

    BrowserSession session_;
    std::unique_ptr<BrowserProcess> process_;
    std::unique_ptr<CdpConnection> connection_;
    std::string target_id_;
    std::string target_session_;
    bool created_target_ = false;
    int event_token_ = 0;
    std::atomic<int> load_events_{0};
    std::atomic<int> loading_starts_{0};
    std::atomic<int> loading_stops_{0};
    std::recursive_mutex command_mutex_;
};

} // namespace webpilot::browser
