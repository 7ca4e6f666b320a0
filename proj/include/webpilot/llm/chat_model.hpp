// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/core/errors.hpp"
#include "webpilot/core/types.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace webpilot::llm {

enum class ChatRole { system, user, assistant, tool };

std::string_view to_string(ChatRole r);

struct ToolCall {
    std::string name;
    ActionArguments arguments;
    std::string id;

    bool operator==(const ToolCall&) const = default;
};

struct ChatMessage {
    ChatRole role = ChatRole::user;
    std::string content;
    std::optional<ToolCall> tool_call;
    std::optional<std::string> tool_call_id;
    std::vector<ImageHandle> images;

    static ChatMessage system(std::string content) { return {ChatRole::system, std::move(content), {}, {}, {}}; }
    static ChatMessage user(std::string content) { return {ChatRole::user, std::move(content), {}, {}, {}}; }
    static ChatMessage assistant(std::string content) { return {ChatRole::assistant, std::move(content), {}, {}, {}}; }
};

void validate(const ChatMessage& m);

enum class ParameterType { string, integer, number, boolean };

struct ToolParameter {
    std::string name;
    ParameterType type = ParameterType::string;
    std::string description;
    bool required = false;
};

struct ToolSchema {
    std::string name;
    std::string description;
    std::vector<ToolParameter> parameters;

    const ToolParameter* parameter(std::string_view name) const;
};

struct ModelConfig {
    std::string api_base;
    std::string model_name;
    double temperature = 0.0;
    int max_output_tokens = 1024;
    std::string api_key;

    /// Reads LLM_API_BASE, LLM_API_KEY and LLM_MODEL.
    static ModelConfig from_env();
};

void validate(const ModelConfig& cfg);

class GatewayError : public Error {
public:
    using Error::Error;
};

class TransportError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class ProviderError : public GatewayError {
public:
    ProviderError(int status, const std::string& body)
        : GatewayError("provider returned HTTP " + std::to_string(status) + ": " + body), status_(status)
    {}
    int status() const { return status_; }

private:
    int status_;
};

class EmptyCompletion : public GatewayError {
public:
    EmptyCompletion() : GatewayError("model returned an empty completion") {}
};

class ScriptExhausted : public GatewayError {
public:
    ScriptExhausted() : GatewayError("script exhausted") {}
};

/// The model named a tool that was not offered.
class ToolSchemaError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

/// The model's tool arguments did not parse or did not match the schema.
class ToolArgumentError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

/// A tool call as returned by a provider, before schema validation.
struct RawToolCall {
    std::string name;
    nlohmann::json arguments;   // object, or a string holding JSON text
    std::string id;
};

/// One completion choice.
struct RawReply {
    std::string text;
    std::vector<RawToolCall> tool_calls;
};

struct ChatRequest {
    const std::vector<ChatMessage>& messages;
    const std::vector<ToolSchema>& tools;
    const ModelConfig& config;
    int choices = 1;
};

/// Either a plain-text answer or one or more validated tool invocations.
struct ToolReply {
    std::string text;
    std::vector<ToolCall> calls;

    bool is_text() const { return calls.empty(); }
};

struct TranscriptEntry {
    std::string label;
    std::vector<ChatMessage> request;
    std::string response;
    std::chrono::system_clock::time_point at;
};

/// Session-scoped log of model exchanges; appends are atomic.
class TranscriptLog {
public:
    void append(TranscriptEntry entry);
    std::vector<TranscriptEntry> snapshot() const;
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::vector<TranscriptEntry> entries_;
};

/// Renders the prompt side of a transcript entry as plain text, for inspection and scanning.
std::string render_request(const std::vector<ChatMessage>& messages);

/// Base for chat-completion providers. Subclasses implement `request`; validation and
/// transcript logging happen here so every provider behaves the same to callers.
class ChatModel {
public:
    virtual ~ChatModel() = default;

    void set_transcript(std::shared_ptr<TranscriptLog> log, std::string label);
    const std::shared_ptr<TranscriptLog>& transcript() const { return transcript_; }

    std::string complete(const std::vector<ChatMessage>& messages, const ModelConfig& cfg);
    ToolReply complete_with_tools(const std::vector<ChatMessage>& messages, const std::vector<ToolSchema>& tools,
                                  const ModelConfig& cfg);

    /// Asks for `n` alternative replies and returns every tool call across them, in order.
    std::vector<ToolCall> sample_tool_calls(const std::vector<ChatMessage>& messages,
                                            const std::vector<ToolSchema>& tools, const ModelConfig& cfg, int n);

protected:
    /// Returns at least one choice.
    virtual std::vector<RawReply> request(const ChatRequest& req) = 0;

    static std::vector<RawReply> forward(ChatModel& target, const ChatRequest& req) { return target.request(req); }

private:
    std::vector<RawReply> logged_request(const ChatRequest& req);

    std::shared_ptr<TranscriptLog> transcript_;
    std::string label_;
};

/// Validates raw tool calls against the offered schemas.
std::vector<ToolCall> validate_tool_calls(const std::vector<RawToolCall>& raw, const std::vector<ToolSchema>& tools);

/// complete_with_tools with one corrective re-prompt on ToolSchemaError / ToolArgumentError.
ToolReply complete_with_tools_retrying(ChatModel& model, std::vector<ChatMessage> messages,
                                       const std::vector<ToolSchema>& tools, const ModelConfig& cfg);

/// Provider whose replies are computed by a callback; used for keyed or rule-based test doubles.
class CallbackModel : public ChatModel {
public:
    using Handler = std::function<RawReply(const ChatRequest&)>;
    explicit CallbackModel(Handler handler) : handler_(std::move(handler)) {}

    int call_count() const { return calls_; }

protected:
    std::vector<RawReply> request(const ChatRequest& req) override;

private:
    Handler handler_;
    std::atomic<int> calls_{0};
};

/// Shares another provider's replies under its own transcript label, so one scripted
/// provider can serve several roles while the transcript still tells them apart.
class RoleView : public ChatModel {
public:
    explicit RoleView(std::shared_ptr<ChatModel> inner) : inner_(std::move(inner)) {}

protected:
    std::vector<RawReply> request(const ChatRequest& req) override { return forward(*inner_, req); }

private:
    std::shared_ptr<ChatModel> inner_;
};

/// Text of the last user message in `messages`, or empty.
std::string last_user_text(const std::vector<ChatMessage>& messages);

} // namespace webpilot::llm
