// SPDX-License-Identifier: Apache-2.0
#include "webpilot/llm/providers.hpp"

#include "webpilot/core/encoding.hpp"
#include "webpilot/core/url.hpp"

#include <httplib.h>

#include <fstream>
#include <sstream>

namespace webpilot::llm {

ScriptEntry ScriptEntry::call(std::string name, nlohmann::json arguments)
{
    return {{}, {RawToolCall{std::move(name), std::move(arguments), {}}}};
}

ScriptedModel::ScriptedModel(std::vector<ScriptEntry> script) : script_(std::move(script))
{
    if (script_.empty())
        throw PreconditionError("scripted provider needs a non-empty script");
}

int ScriptedModel::call_count() const
{
    std::lock_guard lock(mutex_);
    return static_cast<int>(next_);
}

std::size_t ScriptedModel::remaining() const
{
    std::lock_guard lock(mutex_);
    return script_.size() - next_;
}

std::vector<RawReply> ScriptedModel::request(const ChatRequest&)
{
    std::lock_guard lock(mutex_);
    if (next_ >= script_.size())
        throw ScriptExhausted();
    auto const& entry = script_[next_++];
    RawReply reply{entry.text, entry.tool_calls};
    for (std::size_t i = 0; i < reply.tool_calls.size(); ++i)
        if (reply.tool_calls[i].id.empty())
            reply.tool_calls[i].id = "call_" + std::to_string(next_) + "_" + std::to_string(i);
    return {reply};
}

namespace {

RawToolCall parse_script_call(const nlohmann::json& j)
{
    if (!j.is_object() || !j.contains("name") || !j.at("name").is_string())
        throw ParseError("scripted tool call needs a string 'name'");
    return {j.at("name").get<std::string>(), j.value("arguments", nlohmann::json::object()), j.value("id", "")};
}

} // namespace

std::vector<ScriptEntry> parse_script(const nlohmann::json& j)
{
    if (!j.is_array())
        throw ParseError("script must be an array");
    std::vector<ScriptEntry> out;
    for (auto const& item : j) {
        if (item.is_string()) {
            out.push_back(ScriptEntry::reply(item.get<std::string>()));
            continue;
        }
        if (!item.is_object())
            throw ParseError("script entries must be strings or objects");
        ScriptEntry entry;
        if (item.contains("text"))
            entry.text = item.at("text").get<std::string>();
        if (item.contains("tool_call"))
            entry.tool_calls.push_back(parse_script_call(item.at("tool_call")));
        if (item.contains("tool_calls"))
            for (auto const& c : item.at("tool_calls"))
                entry.tool_calls.push_back(parse_script_call(c));
        out.push_back(std::move(entry));
    }
    return out;
}

nlohmann::json HttpChatModel::build_body(const ChatRequest& req)
{
    using nlohmann::json;
    json messages = json::array();
    for (auto const& m : req.messages) {
        json msg{{"role", to_string(m.role)}};
        if (m.images.empty()) {
            msg["content"] = m.content;
        } else {
            json parts = json::array({{{"type", "text"}, {"text", m.content}}});
            for (auto const& img : m.images) {
                if (img.empty())
                    continue;
                parts.push_back({{"type", "image_url"},
                                 {"image_url", {{"url", "data:image/png;base64," + base64_encode(*img.png)}}}});
            }
            msg["content"] = parts;
        }
        if (m.tool_call) {
            json args = json::object();
            for (auto const& [k, v] : m.tool_call->arguments)
                args[k] = v;
            msg["tool_calls"] = json::array({{{"id", m.tool_call->id},
                                              {"type", "function"},
                                              {"function", {{"name", m.tool_call->name}, {"arguments", args.dump()}}}}});
        }
        if (m.tool_call_id)
            msg["tool_call_id"] = *m.tool_call_id;
        messages.push_back(std::move(msg));
    }

    json body{{"model", req.config.model_name},
              {"messages", messages},
              {"temperature", req.config.temperature},
              {"max_tokens", req.config.max_output_tokens}};
    if (req.choices > 1)
        body["n"] = req.choices;
    if (!req.tools.empty()) {
        json tools = json::array();
        for (auto const& t : req.tools) {
            json props = json::object();
            json required = json::array();
            for (auto const& p : t.parameters) {
                static constexpr const char* type_names[] = {"string", "integer", "number", "boolean"};
                props[p.name] = {{"type", type_names[static_cast<int>(p.type)]}, {"description", p.description}};
                if (p.required)
                    required.push_back(p.name);
            }
            json parameters{{"type", "object"}, {"properties", props}, {"required", required}};
            json function{{"name", t.name}, {"description", t.description}, {"parameters", parameters}};
            tools.push_back({{"type", "function"}, {"function", function}});
        }
        body["tools"] = tools;
    }
    return body;
}

std::vector<RawReply> HttpChatModel::parse_response(const nlohmann::json& body)
{
    std::vector<RawReply> out;
    if (!body.contains("choices") || !body.at("choices").is_array())
        throw EmptyCompletion();
    for (auto const& choice : body.at("choices")) {
        auto const& msg = choice.value("message", nlohmann::json::object());
        RawReply reply;
        if (msg.contains("content") && msg.at("content").is_string())
            reply.text = msg.at("content").get<std::string>();
        if (msg.contains("tool_calls") && msg.at("tool_calls").is_array()) {
            for (auto const& tc : msg.at("tool_calls")) {
                auto const& fn = tc.value("function", nlohmann::json::object());
                reply.tool_calls.push_back(
                    {fn.value("name", ""), fn.value("arguments", nlohmann::json("{}")), tc.value("id", "")});
            }
        }
        if (!reply.text.empty() || !reply.tool_calls.empty())
            out.push_back(std::move(reply));
    }
    if (out.empty())
        throw EmptyCompletion();
    return out;
}

std::vector<RawReply> HttpChatModel::request(const ChatRequest& req)
{
    auto url = parse_absolute_url(req.config.api_base);
    if (!url || url->host.empty() || (url->scheme != "http" && url->scheme != "https"))
        throw TransportError("invalid api_base: " + req.config.api_base);

    std::string origin = url->scheme + "://" + url->host;
    if (url->port)
        origin += ":" + std::to_string(*url->port);
    std::string path = url->path;
    if (path.empty() || path.back() != '/')
        path += '/';
    path += "chat/completions";

    httplib::Client client(origin);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!req.config.api_key.empty())
        headers.emplace("Authorization", "Bearer " + req.config.api_key);

    auto res = client.Post(path, headers, build_body(req).dump(), "application/json");
    if (!res)
        throw TransportError("request to " + origin + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw ProviderError(res->status, res->body.substr(0, 500));

    nlohmann::json body;
    try {
        body = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("provider response is not JSON: ") + e.what());
    }
    return parse_response(body);
}

namespace {

std::shared_ptr<ChatModel> view(const std::shared_ptr<ChatModel>& m) { return std::make_shared<RoleView>(m); }

} // namespace

ModelSet ModelSet::uniform(std::shared_ptr<ChatModel> model, ModelConfig cfg)
{
    return {view(model), view(model), view(model), view(model), std::move(cfg)};
}

void ModelSet::attach_transcript(const std::shared_ptr<TranscriptLog>& log)
{
    policy->set_transcript(log, "policy");
    grounding->set_transcript(log, "grounding");
    planner->set_transcript(log, "planner");
    value->set_transcript(log, "value");
}

ModelSet scripted_models_from_json(const nlohmann::json& j)
{
    if (j.is_array())
        return ModelSet::uniform(std::make_shared<ScriptedModel>(parse_script(j)));
    if (!j.is_object())
        throw ParseError("scripted model file must hold an array or an object");

    std::shared_ptr<ChatModel> fallback;
    if (j.contains("default"))
        fallback = std::make_shared<ScriptedModel>(parse_script(j.at("default")));
    auto role = [&](const char* name) -> std::shared_ptr<ChatModel> {
        if (j.contains(name))
            return std::make_shared<ScriptedModel>(parse_script(j.at(name)));
        if (fallback)
            return view(fallback);
        return std::make_shared<CallbackModel>([](const ChatRequest&) -> RawReply {
            throw ScriptExhausted();
        });
    };
    return {role("policy"), role("grounding"), role("planner"), role("value"), {}};
}

ModelSet load_scripted_models(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot read scripted model file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return scripted_models_from_json(nlohmann::json::parse(buf.str()));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("scripted model file " + path.string() + ": " + e.what());
    }
}

ModelSet http_models_from_env()
{
    auto cfg = ModelConfig::from_env();
    return ModelSet::uniform(std::make_shared<HttpChatModel>(), cfg);
}

} // namespace webpilot::llm
