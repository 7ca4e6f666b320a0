// SPDX-License-Identifier: Apache-2.0
#include "webpilot/service/http_service.hpp"

#include <httplib.h>

#include <charconv>
#include <thread>

namespace webpilot::service {

namespace {

constexpr auto poll_interval = std::chrono::milliseconds(250);
constexpr int keepalive_polls = 60;   // one comment line every ~15 s of silence

void reply_json(httplib::Response& res, int status, const Json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message)
{
    reply_json(res, status, {{"error", message}});
}

Json parse_body(const httplib::Request& req)
{
    if (req.body.empty())
        return Json::object();
    try {
        return Json::parse(req.body);
    } catch (const Json::exception& e) {
        throw ParseError(std::string("request body is not valid JSON: ") + e.what());
    }
}

std::optional<long> parse_seq(const std::string& text)
{
    long v = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size() || v < 0)
        return std::nullopt;
    return v;
}

} // namespace

std::string sse_frame(const StepEvent& e)
{
    return "id: " + std::to_string(e.seq) + "\nevent: " + std::string(to_string(e.kind)) + "\ndata: " +
           to_json(e).dump() + "\n\n";
}

struct HttpService::Impl {
    SessionManager& sessions;
    httplib::Server server;
    std::thread thread;
    std::atomic<bool> stopping{false};

    explicit Impl(SessionManager& s) : sessions(s) { routes(); }

    // Runs `fn`, translating domain errors into statuses.
    template <typename Fn>
    void guarded(httplib::Response& res, Fn&& fn)
    {
        try {
            fn();
        } catch (const NotFound& e) {
            reply_error(res, 404, e.what());
        } catch (const Conflict& e) {
            reply_error(res, 409, e.what());
        } catch (const ParseError& e) {
            reply_error(res, 400, e.what());
        } catch (const PreconditionError& e) {
            reply_error(res, 400, e.what());
        } catch (const browser::DriverError& e) {
            reply_error(res, 502, std::string("browser driver failure: ") + e.what());
        } catch (const std::exception& e) {
            reply_error(res, 500, e.what());
        }
    }

    void routes()
    {
        server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto body = parse_body(req);
                if (!body.is_object())
                    throw ParseError("request body must be a JSON object");
                auto env = browser_config_from_json(body.value("browser", body), sessions.options().browser_defaults);
                std::optional<agents::EpisodeConfig> defaults;
                if (body.contains("episode"))
                    defaults = episode_config_from_json(body["episode"], sessions.options().episode_defaults);
                auto session = sessions.create(env, defaults);
                auto const& live = session->browser().live_view_url;
                reply_json(res, 201, {{"session_id", session->id()}, {"live_view_url", live ? Json(*live) : Json(nullptr)}});
            });
        });

        server.Post(R"(/sessions/([^/]+)/instructions)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto id = req.matches[1].str();
                auto instruction_id = sessions.submit(id, parse_body(req));
                reply_json(res, 202, {{"session_id", id}, {"instruction_id", instruction_id}, {"status", "running"}});
            });
        });

        server.Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto session = sessions.get(req.matches[1].str());
                std::string from = req.has_param("from_seq") ? req.get_param_value("from_seq")
                                                             : req.get_header_value("Last-Event-ID");
                long start = 0;
                if (!from.empty()) {
                    auto seq = parse_seq(from);
                    if (!seq)
                        throw ParseError("from_seq must be a non-negative integer");
                    start = *seq;
                }
                stream(res, std::move(session), start);
            });
        });

        server.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { reply_json(res, 200, sessions.get(req.matches[1].str())->summary()); });
        });

        server.Delete(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto id = req.matches[1].str();
                reply_json(res, 200, {{"session_id", id}, {"deleted", sessions.remove(id)}});
            });
        });

        server.Get("/config", [this](const httplib::Request&, httplib::Response& res) {
            auto const& opts = sessions.options();
            reply_json(res, 200,
                       {{"schema", config_schema()},
                        {"defaults",
                         {{"browser", to_json(opts.browser_defaults)},
                          {"episode", to_json(opts.episode_defaults)},
                          {"search", to_json(search::SearchConfig{})}}},
                        {"memory_store", opts.memory ? Json(opts.memory->path().string()) : Json(nullptr)}});
        });
    }

    void stream(httplib::Response& res, std::shared_ptr<Session> session, long start)
    {
        auto cursor = std::make_shared<long>(start);
        auto idle = std::make_shared<int>(0);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream", [this, session, cursor, idle](std::size_t, httplib::DataSink& sink) {
                if (stopping)
                    return false;
                auto& log = session->events();
                auto events = log.wait_since(*cursor, poll_interval);
                for (auto const& e : events) {
                    auto frame = sse_frame(e);
                    if (!sink.write(frame.data(), frame.size()))
                        return false;
                    *cursor = e.seq;
                }
                if (events.empty() && ++*idle >= keepalive_polls) {
                    *idle = 0;
                    static constexpr char ping[] = ": keep-alive\n\n";
                    if (!sink.write(ping, sizeof ping - 1))
                        return false;
                } else if (!events.empty()) {
                    *idle = 0;
                }
                if (log.drained(*cursor))
                    sink.done();
                return true;
            });
    }
};

HttpService::HttpService(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions))
{
    impl_->server.new_task_queue = [] { return new httplib::ThreadPool(32); };
}

HttpService::~HttpService()
{
    stop();
}

int HttpService::bind(const std::string& host, int port)
{
    if (port == 0)
        return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpService::serve()
{
    impl_->server.listen_after_bind();
}

void HttpService::start()
{
    impl_->thread = std::thread([this] { serve(); });
    impl_->server.wait_until_ready();
}

void HttpService::stop()
{
    impl_->stopping = true;
    impl_->server.stop();
    if (impl_->thread.joinable())
        impl_->thread.join();
}

} // namespace webpilot::service
