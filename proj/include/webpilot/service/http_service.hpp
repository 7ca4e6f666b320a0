// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/service/session.hpp"

#include <memory>
#include <string>

namespace webpilot::service {

/// HTTP facade over a SessionManager:
///   POST   /sessions                      201 {session_id, live_view_url}
///   POST   /sessions/{id}/instructions    202 {instruction_id}; 409 while running
///   GET    /sessions/{id}/events          text/event-stream, resumable via ?from_seq=N
///   GET    /sessions/{id}                 status summary
///   DELETE /sessions/{id}                 idempotent
///   GET    /config                        accepted configuration and server defaults
class HttpService {
public:
    explicit HttpService(SessionManager& sessions);
    ~HttpService();

    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
    int bind(const std::string& host, int port);

    /// Blocks serving requests until stop().
    void serve();

    /// serve() on a background thread.
    void start();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Renders one event in server-sent-events framing: id, event and data lines.
std::string sse_frame(const StepEvent& e);

} // namespace webpilot::service
