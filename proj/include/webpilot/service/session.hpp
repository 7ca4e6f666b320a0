// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/service/config_json.hpp"

#include <atomic>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

namespace webpilot::service {

enum class SessionStatus { idle, running, finished, failed };
std::string_view to_string(SessionStatus s);

class NotFound : public Error {
public:
    using Error::Error;
};

/// A second instruction arrived while one is still running.
class Conflict : public Error {
public:
    using Error::Error;
};

/// Per-session event buffer. Sequence numbers start at 1 and never skip. A session may run
/// several instructions in turn; each run ends with exactly one terminal event, after which
/// nothing is appended until the next run begins.
class EventLog {
public:
    /// Marks a run as started; false when one is already running.
    bool begin_run();
    bool running() const;

    /// Assigns seq and timestamp. A terminal kind ends the current run.
    StepEvent append(EventKind kind, std::optional<int> step, Json payload);

    std::vector<StepEvent> since(long from_seq) const;

    /// Waits until an event with seq > from_seq exists, the log is closed, or `timeout` passes.
    std::vector<StepEvent> wait_since(long from_seq, std::chrono::milliseconds timeout) const;

    /// True once the reader at `cursor` has seen everything a finished run will produce.
    bool drained(long cursor) const;

    long last_seq() const;
    std::optional<EventKind> last_terminal() const;

    /// Wakes every waiter for good; used when the session is deleted.
    void close();
    bool closed() const;

private:
    mutable std::mutex mutex_;
    mutable std::condition_variable changed_;
    std::vector<StepEvent> events_;
    bool running_ = false;
    bool closed_ = false;
    std::optional<EventKind> last_terminal_;
};

using DriverFactory = std::function<std::unique_ptr<browser::PageDriver>(const browser::BrowserEnvironmentConfig&)>;
using ModelFactory = std::function<llm::ModelSet()>;

struct ServiceOptions {
    DriverFactory open_driver;            // defaults to a CDP page
    ModelFactory make_models;             // defaults to HTTP models from the environment
    std::shared_ptr<memory::WorkflowStore> memory;
    browser::BrowserEnvironmentConfig browser_defaults;
    agents::EpisodeConfig episode_defaults;
};

class Session {
public:
    Session(std::string id, std::unique_ptr<browser::PageDriver> driver, llm::ModelSet models,
            agents::EpisodeConfig episode_defaults = {});
    ~Session();

    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    const std::string& id() const { return id_; }
    const browser::BrowserSession& browser() const { return browser_; }
    EventLog& events() { return events_; }
    const EventLog& events() const { return events_; }
    const agents::EpisodeConfig& episode_defaults() const { return episode_defaults_; }

    SessionStatus status() const;

    /// Starts the instruction on a worker thread and returns its id. Throws Conflict when busy.
    std::string submit(Instruction instruction, std::shared_ptr<memory::WorkflowStore> memory);

    /// {session_id, status, steps, last_seq, goal, plan, instruction_id, live_view_url}.
    Json summary() const;

    /// Cancels a running episode, waits for the worker, closes the log and the browser.
    void shutdown();

private:
    void run(Instruction instruction, std::shared_ptr<memory::WorkflowStore> memory);
    void record(EventKind kind, std::optional<int> step, const Json& payload);

    std::string id_;
    browser::BrowserSession browser_;
    std::unique_ptr<browser::PageDriver> driver_;
    llm::ModelSet models_;
    agents::EpisodeConfig episode_defaults_;
    EventLog events_;
    std::atomic<bool> cancel_{false};
    std::thread worker_;
    int instructions_ = 0;

    mutable std::mutex state_mutex_;
    std::optional<Goal> goal_;
    Json plan_;   // latest plan as reported by the run
    std::string instruction_id_;
    std::size_t steps_ = 0;
    std::optional<Json> trajectory_;
};

/// Linearizable session table.
class SessionManager {
public:
    explicit SessionManager(ServiceOptions options);
    ~SessionManager();

    /// Opens the browser before registering anything, so a driver failure leaves no session.
    std::shared_ptr<Session> create(const browser::BrowserEnvironmentConfig& env,
                                    const std::optional<agents::EpisodeConfig>& episode_defaults = std::nullopt);
    std::shared_ptr<Session> get(const std::string& id) const;   // throws NotFound
    std::string submit(const std::string& id, const Json& instruction);
    std::size_t size() const;
    /// False when the id was unknown (already deleted).
    bool remove(const std::string& id);

    const ServiceOptions& options() const { return options_; }

private:
    ServiceOptions options_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

} // namespace webpilot::service
