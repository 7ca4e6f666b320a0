// SPDX-License-Identifier: Apache-2.0
#include "fake_driver.hpp"

#include <atomic>

namespace testsupport {

using namespace webpilot;

namespace {

std::string strip_fragment(const std::string& url)
{
    auto hash = url.find('#');
    return hash == std::string::npos ? url : url.substr(0, hash);
}

} // namespace

ImageHandle tiny_png()
{
    static const std::vector<std::uint8_t> bytes = {
        0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A, 0x00, 0x00, 0x00, 0x0D, 0x49, 0x48, 0x44, 0x52,
        0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x08, 0x02, 0x00, 0x00, 0x00, 0xFD, 0xD4, 0x9A,
        0x73, 0x00, 0x00, 0x00, 0x12, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9C, 0x63, 0xF8, 0xCF, 0xC0, 0xC0,
        0xF0, 0x1F, 0x84, 0x19, 0x60, 0x0C, 0x00, 0x4F, 0xCA, 0x07, 0xF9, 0x7E, 0x2B, 0x6E, 0x2E, 0x00,
        0x00, 0x00, 0x00, 0x49, 0x45, 0x4E, 0x44, 0xAE, 0x42, 0x60, 0x82};
    return {std::make_shared<const std::vector<std::uint8_t>>(bytes), 2, 2};
}

FakeDriver::FakeDriver()
{
    static std::atomic<int> counter{0};
    session_.session_id = "fake-" + std::to_string(++counter);
}

void FakeDriver::add_page(const std::string& url, FakePage page)
{
    std::lock_guard lock(mutex_);
    pages_[strip_fragment(url)] = std::move(page);
}

void FakeDriver::add_button_page(const std::string& url, int count)
{
    FakePage page{"buttons", {}};
    for (int i = 1; i <= count; ++i) {
        FakeElement e;
        e.info.tag = "button";
        e.info.id_attr = "b" + std::to_string(i);
        e.info.sibling_index = i;
        e.info.text_excerpt = "Button " + std::to_string(i);
        e.selector = "#b" + std::to_string(i);
        e.navigates_to = strip_fragment(url) + "#" + std::to_string(i);
        page.elements.push_back(std::move(e));
    }
    add_page(url, std::move(page));
}

void FakeDriver::remove_element(const std::string& url, const std::string& selector)
{
    std::lock_guard lock(mutex_);
    auto& els = pages_.at(strip_fragment(url)).elements;
    std::erase_if(els, [&](const FakeElement& e) { return e.selector == selector; });
}

const FakePage* FakeDriver::page() const
{
    auto it = pages_.find(strip_fragment(url_));
    return it == pages_.end() ? nullptr : &it->second;
}

const FakeElement* FakeDriver::find(const std::string& selector) const
{
    if (auto* p = page())
        for (auto const& e : p->elements)
            if (e.selector == selector)
                return &e;
    return nullptr;
}

EvaluationRecord FakeDriver::navigate(std::string_view url)
{
    std::lock_guard lock(mutex_);
    ++navigations_;
    std::string target(url);
    if (!pages_.count(strip_fragment(target)))
        return EvaluationRecord::failure("navigation failed: net::ERR_NAME_NOT_RESOLVED");
    if (url_ != "about:blank")
        history_.push_back(url_);
    url_ = target;
    return EvaluationRecord::success("navigated to " + target, page()->title);
}

Observation FakeDriver::capture_observation(FeatureSet features)
{
    std::lock_guard lock(mutex_);
    ObservationFields f;
    std::vector<ElementInfo> els;
    std::vector<SomMark> marks;
    if (auto* p = page()) {
        int mark = 0;
        for (auto const& e : p->elements) {
            auto info = e.info;
            info.mark_id = ++mark;
            els.push_back(info);
            marks.push_back({mark, {0, 20.0 * mark, 100, 18}, std::string(som_marker) + e.selector});
        }
    }
    if (features.contains(Feature::interactive_elements))
        f.interactive_elements = els;
    if (features.contains(Feature::som))
        f.som = marks;
    if (features.contains(Feature::axtree))
        f.axtree_text = std::string(axtree_marker) + " RootWebArea \"" + (page() ? page()->title : "") + "\"";
    if (features.contains(Feature::dom))
        f.dom_snapshot = std::string("<html><body><!--") + dom_marker + "--></body></html>";
    if (features.contains(Feature::screenshot))
        f.screenshot = tiny_png();
    return Observation(features, url_, std::move(f));
}

EvaluationRecord FakeDriver::execute(const GroundedAction& action)
{
    std::unique_lock lock(mutex_);
    if (fail_after_ == 0)
        throw browser::ConnectionClosed("fake browser went away");
    if (fail_after_ > 0)
        --fail_after_;
    executed_.push_back(action);
    auto summary = page() ? page()->title : std::string();
    switch (action.kind()) {
    case ActionKind::navigate: {
        auto url = action.argument("url").value_or("");
        lock.unlock();
        return navigate(url);
    }
    case ActionKind::finish: return EvaluationRecord::success("finished", summary);
    case ActionKind::scroll: return EvaluationRecord::success("scrolled", summary);
    case ActionKind::go_back:
        if (history_.empty())
            return EvaluationRecord::failure("no previous page");
        url_ = history_.back();
        history_.pop_back();
        return EvaluationRecord::success("went back", summary);
    default: break;
    }
    auto const* el = action.selector() ? find(*action.selector()) : nullptr;
    if (action.selector() && !el && action.kind() != ActionKind::scrape)
        return EvaluationRecord::failure("unresolved target: selector matched 0 elements", summary);
    switch (action.kind()) {
    case ActionKind::click:
        if (el->navigates_to) {
            history_.push_back(url_);
            url_ = *el->navigates_to;
            return EvaluationRecord::success("clicked " + *action.selector(), pages_.count(strip_fragment(url_)) ? page()->title : "");
        }
        return EvaluationRecord::success("clicked " + *action.selector(), summary);
    case ActionKind::fill:
        filled_[*action.selector()] = action.argument("value").value_or("");
        return EvaluationRecord::success("filled " + *action.selector(), summary);
    case ActionKind::select_option:
        filled_[*action.selector()] = action.argument("value").value_or("");
        return EvaluationRecord::success("selected", summary);
    case ActionKind::upload_file: return EvaluationRecord::success("uploaded", summary);
    case ActionKind::scrape: return EvaluationRecord::success("scraped", summary);
    default: return EvaluationRecord::failure("unsupported", summary);
    }
}

bool FakeDriver::highlight(std::string_view selector, std::string_view)
{
    std::lock_guard lock(mutex_);
    if (!find(std::string(selector)))
        return false;
    ++highlights_;
    highlighted_ = true;
    return true;
}

void FakeDriver::clear_highlight()
{
    std::lock_guard lock(mutex_);
    highlighted_ = false;
}

ImageHandle FakeDriver::screenshot()
{
    return tiny_png();
}

std::string FakeDriver::current_url()
{
    std::lock_guard lock(mutex_);
    return url_;
}

std::string FakeDriver::selector_for_mark(int mark_id)
{
    std::lock_guard lock(mutex_);
    auto* p = page();
    if (!p || mark_id < 1 || mark_id > static_cast<int>(p->elements.size()))
        throw browser::UnresolvedTarget("unknown mark " + std::to_string(mark_id));
    return p->elements[static_cast<std::size_t>(mark_id - 1)].selector;
}

std::vector<GroundedAction> FakeDriver::executed() const
{
    std::lock_guard lock(mutex_);
    return executed_;
}

int FakeDriver::navigations() const
{
    std::lock_guard lock(mutex_);
    return navigations_;
}

std::map<std::string, std::string> FakeDriver::filled() const
{
    std::lock_guard lock(mutex_);
    return filled_;
}

} // namespace testsupport
