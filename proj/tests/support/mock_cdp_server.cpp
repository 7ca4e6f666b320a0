// SPDX-License-Identifier: Apache-2.0
#include "mock_cdp_server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <condition_variable>
#include <map>

namespace testsupport {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct MockCdpServer::Impl {
    asio::io_context io;
    tcp::acceptor acceptor{io};
    std::thread accept_thread;
    std::atomic<bool> stopping{false};

    mutable std::mutex log_mutex;
    std::vector<json> received;
    std::vector<json> sent;

    std::mutex conn_mutex;
    std::vector<std::thread> connections;
    std::vector<std::shared_ptr<tcp::socket>> sockets;

    int port = 0;

    void serve(std::shared_ptr<tcp::socket> socket)
    {
        try {
            beast::flat_buffer buffer;
            http::request<http::string_body> req;
            http::read(*socket, buffer, req);
            if (!websocket::is_upgrade(req)) {
                http::response<http::string_body> res{http::status::ok, req.version()};
                res.set(http::field::content_type, "application/json");
                if (req.target() == "/json/version")
                    res.body() = json{{"Browser", "Mock/1.0"},
                                      {"webSocketDebuggerUrl",
                                       "ws://127.0.0.1:" + std::to_string(port) + "/devtools/browser/mock"}}
                                     .dump();
                else
                    res.result(http::status::not_found);
                res.prepare_payload();
                http::write(*socket, res);
                return;
            }
            websocket::stream<tcp::socket&> ws(*socket);
            ws.accept(req);
            ws.text(true);
            session(ws);
        } catch (const std::exception&) {
            // Peer went away or the server is stopping.
        }
    }

    // Just enough of the Target domain for a driver to attach to one page.
    static json canned(const std::string& method, const json& params)
    {
        if (method == "Target.getTargets")
            return {{"targetInfos", json::array({{{"targetId", "T1"}, {"type", "page"}, {"url", "about:blank"},
                                                  {"title", ""}, {"attached", false}}})}};
        if (method == "Target.attachToTarget")
            return {{"sessionId", "S-" + params.value("targetId", std::string("T1"))}};
        if (method == "Target.createTarget")
            return {{"targetId", "T2"}};
        if (method == "Runtime.evaluate")
            return {{"result", {{"type", "string"}, {"value", "about:blank"}}}};
        return {{"method", method}, {"echo", params}};
    }

    void session(websocket::stream<tcp::socket&>& ws)
    {
        std::mutex m;
        std::condition_variable cv;
        std::multimap<Clock::time_point, json> queue;
        bool done = false;
        bool close_requested = false;

        std::thread writer([&] {
            std::unique_lock lock(m);
            while (true) {
                if (close_requested) {
                    lock.unlock();
                    beast::error_code ec;
                    ws.next_layer().shutdown(tcp::socket::shutdown_both, ec);
                    ws.next_layer().close(ec);
                    return;
                }
                if (done && queue.empty())
                    return;
                if (queue.empty()) {
                    cv.wait(lock);
                    continue;
                }
                auto due = queue.begin()->first;
                if (Clock::now() < due) {
                    cv.wait_until(lock, due);
                    continue;
                }
                auto frame = queue.begin()->second;
                queue.erase(queue.begin());
                lock.unlock();
                {
                    std::lock_guard log(log_mutex);
                    sent.push_back(frame);
                }
                beast::error_code ec;
                ws.write(asio::buffer(frame.dump()), ec);
                lock.lock();
                if (ec)
                    return;
            }
        });

        auto push = [&](Clock::time_point due, json frame) {
            {
                std::lock_guard lock(m);
                queue.emplace(due, std::move(frame));
            }
            cv.notify_all();
        };

        try {
            for (;;) {
                beast::flat_buffer buffer;
                ws.read(buffer);
                auto msg = json::parse(beast::buffers_to_string(buffer.data()));
                {
                    std::lock_guard log(log_mutex);
                    received.push_back(msg);
                }
                auto id = msg.value("id", 0L);
                auto method = msg.value("method", "");
                auto now = Clock::now();
                auto due = now + std::chrono::milliseconds(id % 2 ? 15 : 1);
                json event{{"method", "Mock.tick"}, {"params", {{"for", id}}}};
                if (msg.contains("sessionId"))
                    event["sessionId"] = msg["sessionId"];
                push(now, event);
                if (method == "Mock.silent")
                    continue;
                if (method == "Mock.close") {
                    std::lock_guard lock(m);
                    close_requested = true;
                    cv.notify_all();
                    break;
                }
                json reply{{"id", id}};
                if (msg.contains("sessionId"))
                    reply["sessionId"] = msg["sessionId"];
                if (method == "Mock.fail")
                    reply["error"] = {{"code", -32000}, {"message", "mock failure"}};
                else
                    reply["result"] = canned(method, msg.value("params", json::object()));
                if (method == "Mock.strayId")
                    push(now, json{{"id", 987654321}, {"result", json::object()}});
                push(due, std::move(reply));
            }
        } catch (const std::exception&) {
        }
        {
            std::lock_guard lock(m);
            done = true;
        }
        cv.notify_all();
        writer.join();
    }
};

MockCdpServer::MockCdpServer() : impl_(std::make_unique<Impl>())
{
    auto& a = impl_->acceptor;
    tcp::endpoint ep(asio::ip::make_address("127.0.0.1"), 0);
    a.open(ep.protocol());
    a.set_option(asio::socket_base::reuse_address(true));
    a.bind(ep);
    a.listen();
    port_ = a.local_endpoint().port();
    impl_->port = port_;
    impl_->accept_thread = std::thread([impl = impl_.get()] {
        while (!impl->stopping) {
            auto socket = std::make_shared<tcp::socket>(impl->io);
            beast::error_code ec;
            impl->acceptor.accept(*socket, ec);
            if (ec || impl->stopping)
                return;
            std::lock_guard lock(impl->conn_mutex);
            impl->sockets.push_back(socket);
            impl->connections.emplace_back([impl, socket] { impl->serve(socket); });
        }
    });
}

MockCdpServer::~MockCdpServer()
{
    impl_->stopping = true;
    beast::error_code ec;
    {
        // Wake the blocked accept() with one throwaway connection.
        asio::io_context io;
        tcp::socket s(io);
        s.connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), static_cast<unsigned short>(port_)), ec);
        if (impl_->accept_thread.joinable())
            impl_->accept_thread.join();
    }
    impl_->acceptor.close(ec);
    std::lock_guard lock(impl_->conn_mutex);
    for (auto& s : impl_->sockets) {
        s->shutdown(tcp::socket::shutdown_both, ec);
        s->close(ec);
    }
    for (auto& t : impl_->connections)
        if (t.joinable())
            t.join();
}

std::string MockCdpServer::ws_url() const
{
    return "ws://127.0.0.1:" + std::to_string(port_) + "/devtools/browser/mock";
}

std::string MockCdpServer::http_url() const
{
    return "http://127.0.0.1:" + std::to_string(port_);
}

std::vector<json> MockCdpServer::received() const
{
    std::lock_guard lock(impl_->log_mutex);
    return impl_->received;
}

std::vector<json> MockCdpServer::sent() const
{
    std::lock_guard lock(impl_->log_mutex);
    return impl_->sent;
}

} // namespace testsupport
