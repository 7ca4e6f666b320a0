// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/llm/chat_model.hpp"

#include <filesystem>
#include <memory>
#include <mutex>

namespace webpilot::llm {

struct ScriptEntry {
    std::string text;
    std::vector<RawToolCall> tool_calls;

    static ScriptEntry reply(std::string text) { return {std::move(text), {}}; }
    static ScriptEntry call(std::string name, nlohmann::json arguments);
    static ScriptEntry calls(std::vector<RawToolCall> calls) { return {{}, std::move(calls)}; }
};

/// Returns canned replies in order, ignoring prompt content. Each request consumes one entry.
class ScriptedModel : public ChatModel {
public:
    explicit ScriptedModel(std::vector<ScriptEntry> script);

    int call_count() const;
    std::size_t remaining() const;

protected:
    std::vector<RawReply> request(const ChatRequest& req) override;

private:
    mutable std::mutex mutex_;
    std::vector<ScriptEntry> script_;
    std::size_t next_ = 0;
};

/// Parses one script: an array whose items are either a string (text reply), an object with
/// "text", or an object with "tool_call" / "tool_calls" ({"name", "arguments"}).
std::vector<ScriptEntry> parse_script(const nlohmann::json& j);

/// Speaks the chat-completions HTTP JSON protocol (messages, tools, tool_calls).
class HttpChatModel : public ChatModel {
public:
    explicit HttpChatModel(std::chrono::seconds timeout = std::chrono::seconds(120)) : timeout_(timeout) {}

    /// Request body for `req`; exposed for inspection.
    static nlohmann::json build_body(const ChatRequest& req);
    /// Choices from a response body; throws EmptyCompletion when there are none.
    static std::vector<RawReply> parse_response(const nlohmann::json& body);

protected:
    std::vector<RawReply> request(const ChatRequest& req) override;

private:
    std::chrono::seconds timeout_;
};

/// Model roles an episode or search draws on. The same instance may fill several roles.
struct ModelSet {
    std::shared_ptr<ChatModel> policy;
    std::shared_ptr<ChatModel> grounding;
    std::shared_ptr<ChatModel> planner;
    std::shared_ptr<ChatModel> value;
    ModelConfig config;

    static ModelSet uniform(std::shared_ptr<ChatModel> model, ModelConfig cfg = {});

    /// Attaches `log` to every distinct model, labelling entries with their role.
    void attach_transcript(const std::shared_ptr<TranscriptLog>& log);
};

/// Builds scripted models from a file. A top-level array is one script shared by every role;
/// an object may hold separate "policy", "grounding", "planner" and "value" scripts, and
/// roles without a script fall back to "default" when present.
ModelSet load_scripted_models(const std::filesystem::path& path);
ModelSet scripted_models_from_json(const nlohmann::json& j);

/// HTTP models configured from the environment.
ModelSet http_models_from_env();

} // namespace webpilot::llm
