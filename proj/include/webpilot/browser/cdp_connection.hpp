// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/core/errors.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace webpilot::browser {

/// Unrecoverable driver-level failure: the browser or its connection is gone or misbehaving.
class DriverError : public Error {
public:
    using Error::Error;
};

class LaunchError : public DriverError {
public:
    using DriverError::DriverError;
};

class ConnectError : public DriverError {
public:
    using DriverError::DriverError;
};

class CdpTimeout : public DriverError {
public:
    using DriverError::DriverError;
};

class ConnectionClosed : public DriverError {
public:
    using DriverError::DriverError;
};

/// The browser answered a command with an error object.
class CdpCommandError : public DriverError {
public:
    CdpCommandError(std::string method, int code, const std::string& message)
        : DriverError(method + " failed (" + std::to_string(code) + "): " + message)
        , method_(std::move(method))
        , code_(code)
    {}
    const std::string& method() const { return method_; }
    int code() const { return code_; }

private:
    std::string method_;
    int code_;
};

struct CdpEvent {
    std::string method;
    nlohmann::json params;
    std::string session_id;
};

struct CdpFrame {
    bool outgoing = false;
    nlohmann::json message;
};

/// One CDP WebSocket connection. Commands get strictly increasing ids; a reader thread
/// matches each response to its outstanding command and fans events out to subscribers.
/// Event handlers run on the reader thread and must not issue commands.
class CdpConnection {
public:
    using EventHandler = std::function<void(const CdpEvent&)>;

    static std::unique_ptr<CdpConnection> connect(const std::string& ws_url,
                                                  std::chrono::milliseconds timeout = std::chrono::seconds(10));
    ~CdpConnection();

    CdpConnection(const CdpConnection&) = delete;
    CdpConnection& operator=(const CdpConnection&) = delete;

    nlohmann::json send(const std::string& method, nlohmann::json params = nlohmann::json::object(),
                        const std::string& session_id = {},
                        std::chrono::milliseconds timeout = std::chrono::seconds(30));

    int subscribe(EventHandler handler);
    void unsubscribe(int token);

    bool is_open() const;
    void close();

    /// Records every frame sent and received from now on.
    void record_frames(bool enabled);
    std::vector<CdpFrame> frames() const;

    /// Responses whose id matched no outstanding command.
    int unmatched_responses() const;

private:
    struct Impl;
    explicit CdpConnection(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

} // namespace webpilot::browser
