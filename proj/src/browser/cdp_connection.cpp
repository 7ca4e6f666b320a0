// SPDX-License-Identifier: Apache-2.0
#include "webpilot/browser/cdp_connection.hpp"

#include "webpilot/core/url.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <future>
#include <map>
#include <mutex>
#include <thread>

namespace webpilot::browser {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

struct PendingCommand {
    std::string method;
    std::promise<json> promise;
};

struct CdpConnection::Impl {
    net::io_context ioc;
    websocket::stream<beast::tcp_stream> ws{ioc};
    beast::flat_buffer read_buffer;
    std::deque<std::string> write_queue;
    std::thread io_thread;
    std::optional<net::executor_work_guard<net::io_context::executor_type>> work;

    std::mutex send_mutex;   // orders id allocation with enqueueing
    int next_id = 1;

    std::mutex pending_mutex;
    std::map<int, PendingCommand> pending;
    std::atomic<bool> open{false};
    std::string close_reason;
    int unmatched = 0;

    std::mutex handler_mutex;
    std::map<int, EventHandler> handlers;
    int next_token = 1;

    mutable std::mutex frame_mutex;
    bool recording = false;
    std::vector<CdpFrame> frames;

    void record(bool outgoing, const json& message)
    {
        std::lock_guard lock(frame_mutex);
        if (recording)
            frames.push_back({outgoing, message});
    }

    void fail_all(const std::string& reason)
    {
        std::map<int, PendingCommand> orphaned;
        {
            std::lock_guard lock(pending_mutex);
            open = false;
            close_reason = reason;
            orphaned.swap(pending);
        }
        for (auto& [id, cmd] : orphaned)
            cmd.promise.set_exception(std::make_exception_ptr(ConnectionClosed("CDP connection closed: " + reason)));
    }

    void start_read()
    {
        ws.async_read(read_buffer, [this](beast::error_code ec, std::size_t) {
            if (ec) {
                fail_all(ec.message());
                return;
            }
            auto text = beast::buffers_to_string(read_buffer.data());
            read_buffer.consume(read_buffer.size());
            dispatch(text);
            start_read();
        });
    }

    void dispatch(const std::string& text)
    {
        json msg = json::parse(text, nullptr, false);
        if (msg.is_discarded() || !msg.is_object())
            return;
        record(false, msg);

        if (msg.contains("id") && msg.at("id").is_number_integer()) {
            auto id = msg.at("id").get<int>();
            std::optional<PendingCommand> cmd;
            {
                std::lock_guard lock(pending_mutex);
                auto it = pending.find(id);
                if (it == pending.end()) {
                    ++unmatched;
                    return;
                }
                cmd.emplace(std::move(it->second));
                pending.erase(it);
            }
            if (msg.contains("error")) {
                auto const& err = msg.at("error");
                cmd->promise.set_exception(std::make_exception_ptr(
                    CdpCommandError(cmd->method, err.value("code", 0), err.value("message", std::string("unknown error")))));
            } else {
                cmd->promise.set_value(msg.value("result", json::object()));
            }
            return;
        }

        if (!msg.contains("method"))
            return;
        CdpEvent event{msg.at("method").get<std::string>(), msg.value("params", json::object()),
                       msg.value("sessionId", std::string{})};
        std::vector<EventHandler> targets;
        {
            std::lock_guard lock(handler_mutex);
            for (auto const& [token, h] : handlers)
                targets.push_back(h);
        }
        for (auto const& h : targets)
            h(event);
    }

    void do_write()
    {
        ws.async_write(net::buffer(write_queue.front()), [this](beast::error_code ec, std::size_t) {
            write_queue.pop_front();
            if (ec) {
                fail_all(ec.message());
                return;
            }
            if (!write_queue.empty())
                do_write();
        });
    }
};

namespace {

struct WsTarget {
    std::string host;
    std::string port;
    std::string path;
};

WsTarget parse_ws_url(const std::string& url)
{
    auto parsed = parse_absolute_url(url);
    if (!parsed || (parsed->scheme != "ws" && parsed->scheme != "http"))
        throw ConnectError("unsupported CDP endpoint (expected ws://host:port/...): " + url);
    if (parsed->host.empty())
        throw ConnectError("CDP endpoint has no host: " + url);
    auto host = parsed->host;
    if (host.front() == '[')
        host = host.substr(1, host.size() - 2);
    return {host, std::to_string(parsed->port.value_or(80)), parsed->path.empty() ? "/" : parsed->path};
}

} // namespace

CdpConnection::CdpConnection(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

std::unique_ptr<CdpConnection> CdpConnection::connect(const std::string& ws_url, std::chrono::milliseconds timeout)
{
    auto target = parse_ws_url(ws_url);
    auto impl = std::make_unique<Impl>();
    auto& ws = impl->ws;

    // Handshake runs on this thread with a deadline; the reader thread starts afterwards.
    beast::error_code result = net::error::timed_out;
    bool finished = false;
    tcp::resolver resolver(impl->ioc);
    beast::get_lowest_layer(ws).expires_after(timeout);
    resolver.async_resolve(target.host, target.port, [&](beast::error_code ec, tcp::resolver::results_type results) {
        if (ec) {
            result = ec;
            finished = true;
            return;
        }
        beast::get_lowest_layer(ws).async_connect(results, [&](beast::error_code ec, tcp::endpoint) {
            if (ec) {
                result = ec;
                finished = true;
                return;
            }
            ws.async_handshake(target.host + ":" + target.port, target.path, [&](beast::error_code ec) {
                result = ec;
                finished = true;
            });
        });
    });
    impl->ioc.run_for(timeout + std::chrono::milliseconds(200));
    if (!finished) {
        beast::get_lowest_layer(ws).cancel();
        impl->ioc.restart();
        impl->ioc.run_for(std::chrono::milliseconds(200));
        throw ConnectError("timed out connecting to " + ws_url);
    }
    if (result)
        throw ConnectError("cannot connect to " + ws_url + ": " + result.message());

    beast::get_lowest_layer(ws).expires_never();
    ws.read_message_max(512u * 1024 * 1024);
    ws.set_option(websocket::stream_base::timeout::suggested(beast::role_type::client));
    impl->open = true;

    impl->ioc.restart();
    impl->work.emplace(net::make_work_guard(impl->ioc));
    auto* raw = impl.get();
    net::post(impl->ioc, [raw] { raw->start_read(); });
    impl->io_thread = std::thread([raw] { raw->ioc.run(); });
    return std::unique_ptr<CdpConnection>(new CdpConnection(std::move(impl)));
}

CdpConnection::~CdpConnection() { close(); }

void CdpConnection::close()
{
    if (!impl_)
        return;
    if (impl_->io_thread.joinable()) {
        net::post(impl_->ioc, [raw = impl_.get()] {
            beast::error_code ec;
            beast::get_lowest_layer(raw->ws).socket().shutdown(tcp::socket::shutdown_both, ec);
            beast::get_lowest_layer(raw->ws).close();
        });
        impl_->work.reset();
        impl_->io_thread.join();
    }
    impl_->fail_all("closed by client");
}

bool CdpConnection::is_open() const { return impl_->open; }

json CdpConnection::send(const std::string& method, json params, const std::string& session_id,
                         std::chrono::milliseconds timeout)
{
    std::future<json> future;
    int id = 0;
    {
        std::lock_guard send_lock(impl_->send_mutex);
        {
            std::lock_guard lock(impl_->pending_mutex);
            if (!impl_->open)
                throw ConnectionClosed("CDP connection is closed: " + impl_->close_reason);
            id = impl_->next_id++;
            auto& cmd = impl_->pending[id];
            cmd.method = method;
            future = cmd.promise.get_future();
        }
        json msg{{"id", id}, {"method", method}, {"params", std::move(params)}};
        if (!session_id.empty())
            msg["sessionId"] = session_id;
        impl_->record(true, msg);
        net::post(impl_->ioc, [raw = impl_.get(), text = msg.dump()]() mutable {
            raw->write_queue.push_back(std::move(text));
            if (raw->write_queue.size() == 1)
                raw->do_write();
        });
    }

    if (future.wait_for(timeout) != std::future_status::ready) {
        std::lock_guard lock(impl_->pending_mutex);
        impl_->pending.erase(id);
        throw CdpTimeout(method + " timed out after " + std::to_string(timeout.count()) + " ms");
    }
    return future.get();
}

int CdpConnection::subscribe(EventHandler handler)
{
    std::lock_guard lock(impl_->handler_mutex);
    auto token = impl_->next_token++;
    impl_->handlers.emplace(token, std::move(handler));
    return token;
}

void CdpConnection::unsubscribe(int token)
{
    std::lock_guard lock(impl_->handler_mutex);
    impl_->handlers.erase(token);
}

void CdpConnection::record_frames(bool enabled)
{
    std::lock_guard lock(impl_->frame_mutex);
    impl_->recording = enabled;
}

std::vector<CdpFrame> CdpConnection::frames() const
{
    std::lock_guard lock(impl_->frame_mutex);
    return impl_->frames;
}

int CdpConnection::unmatched_responses() const
{
    std::lock_guard lock(impl_->pending_mutex);
    return impl_->unmatched;
}

} // namespace webpilot::browser
