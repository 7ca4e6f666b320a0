// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/browser/launcher.hpp"
#include "webpilot/core/events.hpp"
#include "webpilot/llm/providers.hpp"

#include <atomic>
#include <memory>
#include <mutex>
#include <vector>

namespace testsupport {

inline webpilot::llm::RawReply text_reply(std::string text)
{
    return {std::move(text), {}};
}

inline webpilot::llm::RawReply tool_reply(std::string name, nlohmann::json args = nlohmann::json::object())
{
    return {{}, {{std::move(name), std::move(args), {}}}};
}

/// Replies in order; once the list runs out, keeps repeating `fallback` when given.
inline std::shared_ptr<webpilot::llm::CallbackModel> sequence(std::vector<webpilot::llm::RawReply> replies,
                                                              std::optional<webpilot::llm::RawReply> fallback = {})
{
    auto next = std::make_shared<std::atomic<std::size_t>>(0);
    return std::make_shared<webpilot::llm::CallbackModel>(
        [replies = std::move(replies), fallback, next](const webpilot::llm::ChatRequest&) {
            auto i = next->fetch_add(1);
            if (i < replies.size())
                return replies[i];
            if (fallback)
                return *fallback;
            throw webpilot::llm::ScriptExhausted();
        });
}

/// Separate models per role; the config is left at defaults.
inline webpilot::llm::ModelSet roles(std::shared_ptr<webpilot::llm::ChatModel> policy,
                                     std::shared_ptr<webpilot::llm::ChatModel> grounding,
                                     std::shared_ptr<webpilot::llm::ChatModel> planner = nullptr,
                                     std::shared_ptr<webpilot::llm::ChatModel> value = nullptr)
{
    webpilot::llm::ModelSet m;
    m.policy = std::move(policy);
    m.grounding = std::move(grounding);
    m.planner = planner ? std::move(planner) : sequence({}, text_reply("1. do the task"));
    m.value = value ? std::move(value) : sequence({}, text_reply("0.5"));
    return m;
}

/// Collects emitted events, assigning seq from 1 the way the service log does.
struct EventRecorder {
    mutable std::mutex mutex;
    std::vector<webpilot::StepEvent> events;

    webpilot::EventSink sink()
    {
        return [this](webpilot::EventKind kind, std::optional<int> step, webpilot::Json payload) {
            std::lock_guard lock(mutex);
            webpilot::StepEvent e;
            e.seq = static_cast<long>(events.size()) + 1;
            e.kind = kind;
            e.step_index = step;
            e.payload = std::move(payload);
            e.at = std::chrono::system_clock::now();
            events.push_back(std::move(e));
        };
    }

    std::vector<webpilot::EventKind> kinds() const
    {
        std::lock_guard lock(mutex);
        std::vector<webpilot::EventKind> out;
        for (auto const& e : events)
            out.push_back(e.kind);
        return out;
    }
};

inline bool have_chromium()
{
    return webpilot::browser::locate_browser().has_value();
}

} // namespace testsupport

#define REQUIRE_CHROMIUM()                                                                                       \
    do {                                                                                                         \
        if (!testsupport::have_chromium())                                                                       \
            GTEST_SKIP() << "no Chromium binary found (set WEBPILOT_CHROME)";                                     \
    } while (0)
