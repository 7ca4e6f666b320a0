// SPDX-License-Identifier: Apache-2.0
#include "webpilot/browser/cdp_page.hpp"

#include "page_scripts.hpp"
#include "webpilot/core/encoding.hpp"
#include "webpilot/core/url.hpp"
#include "webpilot/replay/selector.hpp"

#include <httplib.h>

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <thread>

namespace webpilot::browser {

using nlohmann::json;
using namespace std::chrono_literals;

namespace {

constexpr auto load_hard_timeout = 30s;
constexpr auto load_quiet_fallback = 2s;

/// A script threw inside the page. Page-level, so execute turns it into a failure record.
class PageScriptError : public Error {
public:
    using Error::Error;
};

std::string with_sibling_helper(std::string script)
{
    auto pos = script.find("%SIBLING%");
    if (pos != std::string::npos)
        script.replace(pos, 9, scripts::sibling_index_fn);
    return script;
}

std::string call(std::string_view fn, std::initializer_list<std::string> args)
{
    std::string out = "(" + std::string(fn) + ")(";
    bool first = true;
    for (auto const& a : args) {
        if (!first)
            out += ", ";
        out += a;
        first = false;
    }
    return out + ")";
}

std::string random_session_id()
{
    static std::mutex mutex;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mutex);
    char buf[24];
    std::snprintf(buf, sizeof buf, "bs-%016llx", static_cast<unsigned long long>(rng()));
    return buf;
}

std::optional<std::string> opt_string(const json& j, const char* key)
{
    auto it = j.find(key);
    if (it == j.end() || !it->is_string())
        return std::nullopt;
    return it->get<std::string>();
}

ElementInfo element_from_page(const json& j)
{
    ElementInfo e;
    e.tag = j.value("tag", "");
    e.id_attr = opt_string(j, "id");
    e.name_attr = opt_string(j, "name");
    e.role = opt_string(j, "role");
    e.aria_label = opt_string(j, "aria_label");
    e.type_attr = opt_string(j, "type");
    if (auto it = j.find("classes"); it != j.end() && it->is_array())
        for (auto const& c : *it)
            e.classes.push_back(c.get<std::string>());
    e.sibling_index = j.value("sibling_index", 1);
    e.text_excerpt = truncate_utf8(j.value("text", ""), 80);
    if (auto it = j.find("mark_id"); it != j.end() && it->is_number_integer())
        e.mark_id = it->get<int>();
    return e;
}

std::string host_port_of(const std::string& url)
{
    auto parsed = parse_absolute_url(url);
    if (!parsed)
        return {};
    return parsed->host + (parsed->port ? ":" + std::to_string(*parsed->port) : "");
}

void render_ax(const std::map<std::string, const json*>& nodes, const json& node, int depth, std::string& out)
{
    auto role = node.contains("role") ? node["role"].value("value", std::string()) : std::string();
    auto name = node.contains("name") ? node["name"].value("value", std::string()) : std::string();
    bool ignored = node.value("ignored", false);
    bool skip = ignored || role == "InlineTextBox" || ((role == "generic" || role == "none") && name.empty());
    if (!skip) {
        out.append(static_cast<std::size_t>(depth) * 2, ' ');
        out += role;
        if (!name.empty())
            out += " " + json(name).dump();
        out += "\n";
    }
    if (auto it = node.find("childIds"); it != node.end())
        for (auto const& id : *it) {
            auto child = nodes.find(id.get<std::string>());
            if (child != nodes.end())
                render_ax(nodes, *child->second, skip ? depth : depth + 1, out);
        }
}

} // namespace

std::string resolve_ws_endpoint(const std::string& endpoint, std::chrono::milliseconds timeout)
{
    if (endpoint.rfind("ws://", 0) == 0 || endpoint.rfind("wss://", 0) == 0)
        return endpoint;
    auto base = endpoint.find("://") == std::string::npos ? "http://" + endpoint : endpoint;
    auto parsed = parse_absolute_url(base);
    if (!parsed || (parsed->scheme != "http" && parsed->scheme != "https"))
        throw ConnectError("unsupported CDP endpoint: " + endpoint);
    httplib::Client client(parsed->scheme + "://" + host_port_of(base));
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    auto res = client.Get("/json/version");
    if (!res)
        throw ConnectError("cannot reach DevTools endpoint " + endpoint + ": " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw ConnectError("DevTools endpoint " + endpoint + " answered HTTP " + std::to_string(res->status));
    try {
        auto body = json::parse(res->body);
        return body.at("webSocketDebuggerUrl").get<std::string>();
    } catch (const json::exception& e) {
        throw ConnectError("DevTools endpoint " + endpoint + " returned no WebSocket URL: " + e.what());
    }
}

std::unique_ptr<CdpPage> CdpPage::open(const BrowserEnvironmentConfig& cfg)
{
    validate(cfg);
    std::unique_ptr<CdpPage> page(new CdpPage());
    page->session_.session_id = random_session_id();
    page->session_.config = cfg;

    std::string ws;
    if (cfg.mode == BrowserMode::launch_local) {
        LaunchOptions opts;
        opts.executable = cfg.executable;
        opts.headless = cfg.headless;
        opts.width = cfg.viewport.width;
        opts.height = cfg.viewport.height;
        opts.startup_timeout = std::max<std::chrono::milliseconds>(cfg.handshake_timeout, 10s);
        page->process_ = BrowserProcess::launch(opts);
        ws = page->process_->ws_endpoint();
    } else {
        ws = resolve_ws_endpoint(*cfg.endpoint, cfg.handshake_timeout);
    }
    page->connection_ = CdpConnection::connect(ws, cfg.handshake_timeout);
    auto& conn = *page->connection_;

    try {
        if (cfg.mode == BrowserMode::remote_endpoint) {
            auto created = conn.send("Target.createTarget", {{"url", "about:blank"}}, {}, cfg.handshake_timeout);
            page->target_id_ = created.at("targetId").get<std::string>();
            page->created_target_ = true;
        } else {
            auto targets = conn.send("Target.getTargets", json::object(), {}, cfg.handshake_timeout);
            for (auto const& t : targets.value("targetInfos", json::array()))
                if (t.value("type", "") == "page") {
                    page->target_id_ = t.value("targetId", "");
                    break;
                }
            if (page->target_id_.empty()) {
                auto created = conn.send("Target.createTarget", {{"url", "about:blank"}}, {}, cfg.handshake_timeout);
                page->target_id_ = created.at("targetId").get<std::string>();
                page->created_target_ = true;
            }
        }
        auto attached = conn.send("Target.attachToTarget", {{"targetId", page->target_id_}, {"flatten", true}}, {},
                                  cfg.handshake_timeout);
        page->target_session_ = attached.at("sessionId").get<std::string>();
    } catch (const json::exception& e) {
        throw ConnectError(std::string("malformed attach handshake: ") + e.what());
    }

    auto* raw = page.get();
    page->event_token_ = conn.subscribe([raw](const CdpEvent& ev) {
        if (ev.session_id != raw->target_session_)
            return;
        if (ev.method == "Page.loadEventFired") {
            ++raw->load_events_;
        } else if (ev.method == "Page.frameStartedLoading" || ev.method == "Page.frameStoppedLoading") {
            if (ev.params.value("frameId", "") != raw->target_id_)
                return;
            if (ev.method == "Page.frameStartedLoading")
                ++raw->loading_starts_;
            else
                ++raw->loading_stops_;
        }
    });

    for (auto domain : {"Page.enable", "DOM.enable", "Runtime.enable"})
        page->command(domain, json::object(), cfg.handshake_timeout);
    if (cfg.mode != BrowserMode::attach_cdp)
        page->command("Emulation.setDeviceMetricsOverride",
                      {{"width", cfg.viewport.width},
                       {"height", cfg.viewport.height},
                       {"deviceScaleFactor", 1},
                       {"mobile", false}},
                      cfg.handshake_timeout);

    if (cfg.mode == BrowserMode::remote_endpoint) {
        auto hp = host_port_of(ws);
        page->session_.live_view_url =
            "http://" + hp + "/devtools/inspector.html?ws=" + hp + "/devtools/page/" + page->target_id_;
    }
    return page;
}

CdpPage::~CdpPage()
{
    if (!connection_)
        return;
    connection_->unsubscribe(event_token_);
    if (created_target_ && connection_->is_open()) {
        try {
            connection_->send("Target.closeTarget", {{"targetId", target_id_}}, {}, 2s);
        } catch (const Error&) {
        }
    }
    connection_->close();
}

json CdpPage::command(const std::string& method, json params, std::chrono::milliseconds timeout)
{
    std::lock_guard lock(command_mutex_);
    return connection_->send(method, std::move(params), target_session_, timeout);
}

json CdpPage::evaluate(const std::string& expression)
{
    auto res = command("Runtime.evaluate",
                       {{"expression", expression}, {"returnByValue", true}, {"awaitPromise", true}});
    if (auto it = res.find("exceptionDetails"); it != res.end()) {
        std::string text = it->value("text", "script error");
        if (it->contains("exception"))
            text += ": " + (*it)["exception"].value("description", std::string());
        throw PageScriptError(text);
    }
    auto const& result = res.value("result", json::object());
    return result.contains("value") ? result["value"] : json();
}

void CdpPage::wait_for_load(int loads_before, std::chrono::steady_clock::time_point started)
{
    while (std::chrono::steady_clock::now() - started < load_hard_timeout) {
        if (load_events_.load() > loads_before)
            return;
        if (std::chrono::steady_clock::now() - started >= load_quiet_fallback) {
            try {
                if (evaluate("document.readyState") == "complete")
                    return;
            } catch (const PageScriptError&) {
            }
        }
        std::this_thread::sleep_for(20ms);
    }
    throw PageScriptError("page load timed out after 30 s");
}

void CdpPage::settle_after_action(int starts_before)
{
    // A navigation triggered by the action starts loading shortly after; give it a moment.
    auto started = std::chrono::steady_clock::now();
    while (loading_starts_.load() == starts_before && std::chrono::steady_clock::now() - started < 150ms)
        std::this_thread::sleep_for(10ms);
    if (loading_starts_.load() == starts_before)
        return;
    while (loading_stops_.load() < loading_starts_.load()) {
        if (std::chrono::steady_clock::now() - started > load_hard_timeout)
            throw PageScriptError("page load timed out after 30 s");
        std::this_thread::sleep_for(20ms);
    }
}

std::string CdpPage::page_summary()
{
    try {
        auto s = evaluate(scripts::page_summary);
        std::string out = "title: " + s.value("title", "") + " | url: " + s.value("url", "");
        auto text = s.value("text", "");
        if (!text.empty())
            out += " | " + text;
        return truncate_utf8(out, page_summary_limit);
    } catch (const PageScriptError&) {
        return {};
    }
}

std::string CdpPage::current_url()
{
    auto v = evaluate("location.href");
    return v.is_string() ? v.get<std::string>() : std::string();
}

EvaluationRecord CdpPage::navigate(std::string_view url)
{
    std::string target(url);
    if (!is_navigable_url(target))
        return EvaluationRecord::failure("invalid URL: " + target);
    try {
        auto started = std::chrono::steady_clock::now();
        int loads_before = load_events_.load();
        auto res = command("Page.navigate", {{"url", target}}, load_hard_timeout);
        if (auto err = res.value("errorText", std::string()); !err.empty())
            return EvaluationRecord::failure("navigation to " + target + " failed: " + err, page_summary());
        if (res.contains("loaderId"))
            wait_for_load(loads_before, started);
        return EvaluationRecord::success("navigated to " + target, page_summary());
    } catch (const CdpCommandError& e) {
        return EvaluationRecord::failure(std::string("navigation failed: ") + e.what());
    } catch (const PageScriptError& e) {
        return EvaluationRecord::failure(e.what(), page_summary());
    }
}

Observation CdpPage::capture_observation(FeatureSet features)
{
    ObservationFields fields;
    auto url = current_url();

    if (features.contains(Feature::interactive_elements) || features.contains(Feature::som)) {
        auto found = evaluate(with_sibling_helper(scripts::discover_elements));
        std::vector<ElementInfo> elements;
        std::vector<SomMark> marks;
        json boxes = json::array();
        for (auto const& item : found) {
            auto e = element_from_page(item);
            auto const& b = item["box"];
            SomMark m{*e.mark_id,
                      {b.value("x", 0.0), b.value("y", 0.0), b.value("width", 0.0), b.value("height", 0.0)},
                      e.tag + (e.text_excerpt.empty() ? "" : " " + json(e.text_excerpt).dump())};
            boxes.push_back({{"mark_id", m.mark_id}, {"x", m.box.x}, {"y", m.box.y},
                             {"width", m.box.width}, {"height", m.box.height}});
            elements.push_back(std::move(e));
            marks.push_back(std::move(m));
        }
        if (features.contains(Feature::som)) {
            evaluate(call(scripts::inject_som, {boxes.dump()}));
            fields.som = std::move(marks);
        }
        if (features.contains(Feature::interactive_elements))
            fields.interactive_elements = std::move(elements);
    }
    if (features.contains(Feature::axtree))
        fields.axtree_text = axtree_text();
    if (features.contains(Feature::dom)) {
        auto dom = dom_snapshot();
        if (dom.size() > dom_snapshot_cap_bytes) {
            std::size_t cut = dom_snapshot_cap_bytes;
            while (cut > 0 && (static_cast<unsigned char>(dom[cut]) & 0xC0) == 0x80)
                --cut;
            dom.resize(cut);
            fields.dom_truncated = true;
        }
        fields.dom_snapshot = std::move(dom);
    }
    if (features.contains(Feature::screenshot))
        fields.screenshot = screenshot();
    return Observation(features, std::move(url), std::move(fields));
}

std::string CdpPage::axtree_text()
{
    auto res = command("Accessibility.getFullAXTree");
    auto const& list = res.value("nodes", json::array());
    std::map<std::string, const json*> nodes;
    for (auto const& n : list)
        nodes[n.value("nodeId", "")] = &n;
    std::string out;
    for (auto const& n : list)
        if (!n.contains("parentId"))
            render_ax(nodes, n, 0, out);
    return out;
}

std::string CdpPage::dom_snapshot()
{
    auto v = evaluate(scripts::dom_snapshot);
    return v.is_string() ? v.get<std::string>() : std::string();
}

std::string CdpPage::raw_html()
{
    auto v = evaluate("document.documentElement.outerHTML");
    return v.is_string() ? v.get<std::string>() : std::string();
}

EvaluationRecord CdpPage::execute(const GroundedAction& action)
{
    try {
        switch (action.kind()) {
        case ActionKind::finish:
            return EvaluationRecord::success("finished", page_summary());
        case ActionKind::navigate:
            return navigate(action.argument("url").value_or(""));
        case ActionKind::go_back:
            return go_back();
        case ActionKind::upload_file:
            return upload_file(action);
        case ActionKind::scroll:
            if (!action.selector()) {
                auto dir = action.argument("direction").value_or("down");
                evaluate(call(scripts::page_scroll, {json(dir).dump()}));
                return EvaluationRecord::success("scrolled page " + dir, page_summary());
            }
            break;
        case ActionKind::scrape:
            if (!action.selector()) {
                auto text = evaluate(scripts::page_text);
                return EvaluationRecord::success("scraped: " + text.get<std::string>(), page_summary());
            }
            break;
        default:
            break;
        }
        return run_element_action(action);
    } catch (const CdpCommandError& e) {
        return EvaluationRecord::failure(e.what(), page_summary());
    } catch (const DriverError&) {
        throw;
    } catch (const Error& e) {
        return EvaluationRecord::failure(e.what(), page_summary());
    }
}

EvaluationRecord CdpPage::run_element_action(const GroundedAction& action)
{
    if (!action.selector() || action.selector()->empty())
        return EvaluationRecord::failure("unresolved target: no selector");
    json args = {{"kind", std::string(to_string(action.kind()))}, {"selector", *action.selector()}};
    if (auto v = action.argument("value"))
        args["value"] = *v;
    if (auto d = action.argument("direction"))
        args["direction"] = *d;

    int starts_before = loading_starts_.load();
    auto res = evaluate(call(scripts::element_action, {args.dump()}));
    if (!res.value("ok", false))
        return EvaluationRecord::failure(res.value("error", "action failed"), page_summary());
    if (res.value("mouse", false)) {
        double x = res.value("x", 0.0), y = res.value("y", 0.0);
        command("Input.dispatchMouseEvent", {{"type", "mouseMoved"}, {"x", x}, {"y", y}});
        for (auto type : {"mousePressed", "mouseReleased"})
            command("Input.dispatchMouseEvent",
                    {{"type", type}, {"x", x}, {"y", y}, {"button", "left"}, {"clickCount", 1}});
    }
    settle_after_action(starts_before);
    return EvaluationRecord::success(res.value("message", "done"), page_summary());
}

EvaluationRecord CdpPage::upload_file(const GroundedAction& action)
{
    auto path = action.argument("path").value_or("");
    if (path.empty() || !std::filesystem::is_regular_file(path))
        return EvaluationRecord::failure("upload file not found: " + path, page_summary());
    if (!action.selector())
        return EvaluationRecord::failure("unresolved target: no selector");
    json args = {{"kind", "upload_file"}, {"selector", *action.selector()}};
    auto res = evaluate(call(scripts::element_action, {args.dump()}));
    if (!res.value("ok", false))
        return EvaluationRecord::failure(res.value("error", "upload failed"), page_summary());
    auto doc = command("DOM.getDocument", {{"depth", 0}});
    auto node = command("DOM.querySelector",
                        {{"nodeId", doc.at("root").at("nodeId")}, {"selector", *action.selector()}});
    command("DOM.setFileInputFiles",
            {{"files", json::array({std::filesystem::absolute(path).string()})}, {"nodeId", node.at("nodeId")}});
    return EvaluationRecord::success("uploaded " + path + " to " + *action.selector(), page_summary());
}

EvaluationRecord CdpPage::go_back()
{
    auto history = command("Page.getNavigationHistory");
    int index = history.value("currentIndex", 0);
    if (index <= 0)
        return EvaluationRecord::failure("no previous page in history", page_summary());
    auto started = std::chrono::steady_clock::now();
    int loads_before = load_events_.load();
    command("Page.navigateToHistoryEntry", {{"entryId", history.at("entries").at(index - 1).at("id")}});
    wait_for_load(loads_before, started);
    return EvaluationRecord::success("went back to " + current_url(), page_summary());
}

bool CdpPage::highlight(std::string_view selector, std::string_view note)
{
    json args = {{"selector", std::string(selector)}, {"note", std::string(note)}};
    bool ok = false;
    try {
        ok = evaluate(call(scripts::highlight, {args.dump()})) == true;
    } catch (const PageScriptError&) {
    }
    if (!ok)
        std::cerr << "webpilot: highlight skipped, selector did not resolve uniquely: " << selector << "\n";
    return ok;
}

void CdpPage::clear_highlight()
{
    evaluate(call(scripts::remove_overlay, {"\"highlight\""}));
}

ImageHandle CdpPage::screenshot()
{
    auto res = command("Page.captureScreenshot", {{"format", "png"}});
    auto bytes = base64_decode(res.value("data", ""));
    ImageHandle img;
    if (auto dims = png_dimensions(bytes)) {
        img.width = dims->first;
        img.height = dims->second;
    }
    img.png = std::make_shared<const std::vector<std::uint8_t>>(std::move(bytes));
    return img;
}

std::string CdpPage::selector_for_expression(const std::string& element_expr)
{
    auto chain_json = evaluate(call(with_sibling_helper(scripts::element_chain), {element_expr}));
    if (!chain_json.is_array() || chain_json.empty())
        throw UnresolvedTarget("element is not attached to the document");
    replay::ElementChain chain;
    for (auto const& n : chain_json)
        chain.push_back({element_from_page(n), opt_string(n, "testid")});
    auto query = [&](const std::string& sel) {
        auto r = evaluate(call(scripts::probe_selector, {json(sel).dump(), element_expr}));
        return replay::SelectorMatch{r.value("count", 0), r.value("first", false)};
    };
    return replay::unique_selector(chain, query);
}

std::string CdpPage::selector_for_mark(int mark_id)
{
    auto expr = "(window.__webpilotMarks || [])[" + std::to_string(mark_id) + "]";
    if (mark_id < 1)
        throw UnresolvedTarget("mark " + std::to_string(mark_id) + " is not on the page");
    try {
        return selector_for_expression(expr);
    } catch (const UnresolvedTarget&) {
        throw UnresolvedTarget("mark " + std::to_string(mark_id) + " is not on the page");
    }
}

int CdpPage::count_matches(const std::string& css)
{
    auto r = evaluate("(function(s){try{return document.querySelectorAll(s).length;}catch(e){return -1;}})("
                      + json(css).dump() + ")");
    return r.is_number_integer() ? r.get<int>() : -1;
}

std::string CdpPage::selector_for_query(const std::string& css)
{
    int n = count_matches(css);
    if (n != 1)
        throw UnresolvedTarget("selector " + css + " matched " + std::to_string(n) + " elements");
    return selector_for_expression("document.querySelector(" + json(css).dump() + ")");
}

bool CdpPage::same_element(const std::string& css_a, const std::string& css_b)
{
    auto r = evaluate(
        "(function(a,b){try{const x=document.querySelectorAll(a),y=document.querySelectorAll(b);"
        "return x.length===1&&y.length===1&&x[0]===y[0];}catch(e){return false;}})("
        + json(css_a).dump() + "," + json(css_b).dump() + ")");
    return r == true;
}

} // namespace webpilot::browser
