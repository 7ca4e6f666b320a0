// SPDX-License-Identifier: Apache-2.0
// A two-button world for tree-search tests: every state offers click "A" and click "B",
// the value model scores a trajectory from its action letters.
#pragma once

#include "webpilot/search/tree_search.hpp"

#include "fake_driver.hpp"
#include "helpers.hpp"

#include <functional>
#include <regex>

namespace testsupport {

inline const std::string search_home = "http://fixture.test/index.html";

/// Letters of the `click "X"` actions in a rendered history, in order.
inline std::string action_letters(const std::string& text)
{
    static const std::regex step(R"re(\d+\. click "([A-Z])")re");
    std::string out;
    for (std::sregex_iterator it(text.begin(), text.end(), step), end; it != end; ++it)
        out += (*it)[1].str();
    return out;
}

struct SearchWorld {
    FakeDriver driver;
    EventRecorder rec;
    webpilot::llm::ModelSet models;

    /// `value` maps the path letters (e.g. "AB") to a score in [0,1].
    explicit SearchWorld(std::function<double(const std::string&)> value, std::vector<std::string> letters = {"A", "B"})
    {
        using webpilot::llm::ChatRequest;
        using webpilot::llm::RawReply;
        driver.add_button_page(search_home, static_cast<int>(letters.size()));
        auto policy = std::make_shared<webpilot::llm::CallbackModel>([letters](const ChatRequest& req) {
            RawReply r;
            for (int i = 0; i < req.choices; ++i)
                r.tool_calls.push_back({"click", {{"target", letters[static_cast<std::size_t>(i) % letters.size()]}}, {}});
            return r;
        });
        auto grounder = std::make_shared<webpilot::llm::CallbackModel>([letters](const ChatRequest& req) {
            auto text = webpilot::llm::last_user_text(req.messages);
            for (std::size_t i = 0; i < letters.size(); ++i)
                if (text.find("Action: click \"" + letters[i] + "\"") != std::string::npos)
                    return tool_reply("click", {{"mark", std::to_string(i + 1)}});
            return text_reply("no such element");
        });
        auto valuer = std::make_shared<webpilot::llm::CallbackModel>([value](const ChatRequest& req) {
            return text_reply(std::to_string(value(action_letters(webpilot::llm::last_user_text(req.messages)))));
        });
        models = roles(policy, grounder, nullptr, valuer);
    }

    webpilot::search::SearchDeps deps(const std::atomic<bool>* cancel = nullptr)
    {
        return {driver, models, rec.sink(), cancel};
    }

    static webpilot::Goal goal() { return webpilot::Goal("find the best page", search_home); }
    static webpilot::Plan plan() { return webpilot::Plan::user_supplied("explore"); }
};

/// Path letters of a node, read from its actions.
inline std::string node_letters(const webpilot::search::SearchTree& tree, int id)
{
    std::string out;
    for (int n : tree.path_to(id))
        out += action_letters("1. " + tree.node(n).action->text());
    return out;
}

} // namespace testsupport
