// SPDX-License-Identifier: Apache-2.0
#include "webpilot/llm/chat_model.hpp"

#include <cmath>
#include <cstdlib>
#include <set>

namespace webpilot::llm {

std::string_view to_string(ChatRole r)
{
    switch (r) {
    case ChatRole::system: return "system";
    case ChatRole::user: return "user";
    case ChatRole::assistant: return "assistant";
    case ChatRole::tool: return "tool";
    }
    return "user";
}

void validate(const ChatMessage& m)
{
    if (m.role == ChatRole::tool && (!m.tool_call_id || m.tool_call_id->empty()))
        throw InvariantViolation("tool messages require a tool_call_id");
    if (m.tool_call && m.role != ChatRole::assistant)
        throw InvariantViolation("only assistant messages may carry a tool call");
}

const ToolParameter* ToolSchema::parameter(std::string_view name) const
{
    for (auto const& p : parameters)
        if (p.name == name)
            return &p;
    return nullptr;
}

ModelConfig ModelConfig::from_env()
{
    auto env = [](const char* name, const char* fallback) {
        const char* v = std::getenv(name);
        return std::string(v && *v ? v : fallback);
    };
    ModelConfig cfg;
    cfg.api_base = env("LLM_API_BASE", "https://api.openai.com/v1");
    cfg.model_name = env("LLM_MODEL", "gpt-4o");
    cfg.api_key = env("LLM_API_KEY", "");
    return cfg;
}

void validate(const ModelConfig& cfg)
{
    if (!(cfg.temperature >= 0.0 && cfg.temperature <= 2.0))
        throw InvariantViolation("temperature must be within [0, 2]");
    if (cfg.max_output_tokens <= 0)
        throw InvariantViolation("max_output_tokens must be positive");
}

void TranscriptLog::append(TranscriptEntry entry)
{
    std::lock_guard lock(mutex_);
    entries_.push_back(std::move(entry));
}

std::vector<TranscriptEntry> TranscriptLog::snapshot() const
{
    std::lock_guard lock(mutex_);
    return entries_;
}

std::size_t TranscriptLog::size() const
{
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::string render_request(const std::vector<ChatMessage>& messages)
{
    std::string out;
    for (auto const& m : messages) {
        out += '[';
        out += to_string(m.role);
        out += "]\n";
        out += m.content;
        if (m.tool_call) {
            out += "\n(tool call " + m.tool_call->name + ")";
        }
        if (!m.images.empty())
            out += "\n(" + std::to_string(m.images.size()) + " image(s))";
        out += '\n';
    }
    return out;
}

namespace {

std::string render_replies(const std::vector<RawReply>& replies)
{
    nlohmann::json out = nlohmann::json::array();
    for (auto const& r : replies) {
        nlohmann::json calls = nlohmann::json::array();
        for (auto const& c : r.tool_calls)
            calls.push_back({{"name", c.name}, {"arguments", c.arguments}});
        out.push_back({{"text", r.text}, {"tool_calls", calls}});
    }
    return out.dump();
}

void check_messages(const std::vector<ChatMessage>& messages)
{
    if (messages.empty())
        throw PreconditionError("chat request needs at least one message");
    if (messages.front().role != ChatRole::system && messages.front().role != ChatRole::user)
        throw PreconditionError("first chat message must be a system or user message");
    for (auto const& m : messages)
        validate(m);
}

std::string scalar_to_string(const nlohmann::json& v)
{
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_boolean())
        return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer())
        return std::to_string(v.get<long long>());
    return v.dump();
}

bool valid_integer(const nlohmann::json& v)
{
    if (v.is_number_integer())
        return true;
    if (v.is_number_float()) {
        double d = v.get<double>();
        return std::floor(d) == d;
    }
    if (!v.is_string())
        return false;
    auto s = v.get<std::string>();
    if (s.empty())
        return false;
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size())
        return false;
    for (; i < s.size(); ++i)
        if (s[i] < '0' || s[i] > '9')
            return false;
    return true;
}

bool valid_number(const nlohmann::json& v)
{
    if (v.is_number())
        return true;
    if (!v.is_string())
        return false;
    auto s = v.get<std::string>();
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return !s.empty() && end == s.c_str() + s.size();
}

std::string normalized_integer(const nlohmann::json& v)
{
    if (v.is_number_float())
        return std::to_string(static_cast<long long>(v.get<double>()));
    if (v.is_number_integer())
        return std::to_string(v.get<long long>());
    auto s = v.get<std::string>();
    if (!s.empty() && s[0] == '+')
        s.erase(0, 1);
    return s;
}

} // namespace

std::vector<ToolCall> validate_tool_calls(const std::vector<RawToolCall>& raw, const std::vector<ToolSchema>& tools)
{
    std::vector<ToolCall> out;
    for (auto const& call : raw) {
        auto const* schema = [&]() -> const ToolSchema* {
            for (auto const& t : tools)
                if (t.name == call.name)
                    return &t;
            return nullptr;
        }();
        if (!schema)
            throw ToolSchemaError("model called unknown tool '" + call.name + "'");

        nlohmann::json args = call.arguments;
        if (args.is_string()) {
            auto text = args.get<std::string>();
            if (text.empty())
                text = "{}";
            try {
                args = nlohmann::json::parse(text);
            } catch (const nlohmann::json::exception&) {
                throw ToolArgumentError("arguments for '" + call.name + "' are not valid JSON: " + text);
            }
        }
        if (args.is_null())
            args = nlohmann::json::object();
        if (!args.is_object())
            throw ToolArgumentError("arguments for '" + call.name + "' must be an object");

        ToolCall tc{call.name, {}, call.id};
        for (auto const& [key, value] : args.items()) {
            auto const* p = schema->parameter(key);
            if (!p)
                throw ToolArgumentError("tool '" + call.name + "' has no parameter '" + key + "'");
            if (value.is_null()) {
                if (p->required)
                    throw ToolArgumentError("required parameter '" + key + "' of '" + call.name + "' is null");
                continue;
            }
            switch (p->type) {
            case ParameterType::integer:
                if (!valid_integer(value))
                    throw ToolArgumentError("parameter '" + key + "' of '" + call.name + "' must be an integer");
                tc.arguments[key] = normalized_integer(value);
                break;
            case ParameterType::number:
                if (!valid_number(value))
                    throw ToolArgumentError("parameter '" + key + "' of '" + call.name + "' must be a number");
                tc.arguments[key] = scalar_to_string(value);
                break;
            case ParameterType::boolean:
                if (!value.is_boolean() && !(value.is_string() && (value == "true" || value == "false")))
                    throw ToolArgumentError("parameter '" + key + "' of '" + call.name + "' must be a boolean");
                tc.arguments[key] = scalar_to_string(value);
                break;
            case ParameterType::string:
                if (value.is_object() || value.is_array())
                    throw ToolArgumentError("parameter '" + key + "' of '" + call.name + "' must be a string");
                tc.arguments[key] = scalar_to_string(value);
                break;
            }
        }
        for (auto const& p : schema->parameters)
            if (p.required && !tc.arguments.contains(p.name))
                throw ToolArgumentError("tool '" + call.name + "' is missing required parameter '" + p.name + "'");
        out.push_back(std::move(tc));
    }
    return out;
}

void ChatModel::set_transcript(std::shared_ptr<TranscriptLog> log, std::string label)
{
    transcript_ = std::move(log);
    label_ = std::move(label);
}

std::vector<RawReply> ChatModel::logged_request(const ChatRequest& req)
{
    check_messages(req.messages);
    validate(req.config);
    std::vector<RawReply> replies;
    try {
        replies = request(req);
    } catch (const std::exception& e) {
        if (transcript_)
            transcript_->append({label_, req.messages, std::string("error: ") + e.what(), std::chrono::system_clock::now()});
        throw;
    }
    if (transcript_)
        transcript_->append({label_, req.messages, render_replies(replies), std::chrono::system_clock::now()});
    if (replies.empty())
        throw EmptyCompletion();
    return replies;
}

std::string ChatModel::complete(const std::vector<ChatMessage>& messages, const ModelConfig& cfg)
{
    static const std::vector<ToolSchema> no_tools;
    auto replies = logged_request({messages, no_tools, cfg, 1});
    auto const& reply = replies.front();
    if (!reply.tool_calls.empty())
        throw ToolSchemaError("model returned a tool call to a request that offered no tools");
    if (reply.text.empty())
        throw EmptyCompletion();
    return reply.text;
}

ToolReply ChatModel::complete_with_tools(const std::vector<ChatMessage>& messages,
                                         const std::vector<ToolSchema>& tools, const ModelConfig& cfg)
{
    if (tools.empty())
        throw PreconditionError("complete_with_tools needs at least one tool");
    std::set<std::string> names;
    for (auto const& t : tools)
        if (!names.insert(t.name).second)
            throw PreconditionError("duplicate tool name '" + t.name + "'");

    auto replies = logged_request({messages, tools, cfg, 1});
    auto const& reply = replies.front();
    ToolReply out;
    out.calls = validate_tool_calls(reply.tool_calls, tools);
    if (out.calls.empty()) {
        if (reply.text.empty())
            throw EmptyCompletion();
        out.text = reply.text;
    }
    return out;
}

std::vector<ToolCall> ChatModel::sample_tool_calls(const std::vector<ChatMessage>& messages,
                                                   const std::vector<ToolSchema>& tools, const ModelConfig& cfg, int n)
{
    if (n < 1)
        throw PreconditionError("sample count must be at least 1");
    if (tools.empty())
        throw PreconditionError("sampling needs at least one tool");
    auto replies = logged_request({messages, tools, cfg, n});
    std::vector<ToolCall> out;
    for (auto const& r : replies)
        for (auto& c : validate_tool_calls(r.tool_calls, tools))
            out.push_back(std::move(c));
    return out;
}

ToolReply complete_with_tools_retrying(ChatModel& model, std::vector<ChatMessage> messages,
                                       const std::vector<ToolSchema>& tools, const ModelConfig& cfg)
{
    try {
        return model.complete_with_tools(messages, tools, cfg);
    } catch (const ToolSchemaError& e) {
        messages.push_back(ChatMessage::assistant("(invalid tool call)"));
        messages.push_back(ChatMessage::user(std::string("Your previous tool call was rejected: ") + e.what()
                                             + ". Call one of the offered tools with valid arguments."));
    } catch (const ToolArgumentError& e) {
        messages.push_back(ChatMessage::assistant("(invalid tool call)"));
        messages.push_back(ChatMessage::user(std::string("Your previous tool call was rejected: ") + e.what()
                                             + ". Call one of the offered tools with valid arguments."));
    }
    return model.complete_with_tools(messages, tools, cfg);
}

std::vector<RawReply> CallbackModel::request(const ChatRequest& req)
{
    ++calls_;
    return {handler_(req)};
}

std::string last_user_text(const std::vector<ChatMessage>& messages)
{
    for (auto it = messages.rbegin(); it != messages.rend(); ++it)
        if (it->role == ChatRole::user)
            return it->content;
    return {};
}

} // namespace webpilot::llm
