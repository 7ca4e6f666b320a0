// SPDX-License-Identifier: Apache-2.0
#include "webpilot/service/session.hpp"

#include "webpilot/browser/cdp_page.hpp"

#include <iomanip>
#include <random>
#include <sstream>

namespace webpilot::service {

namespace {

std::string random_id()
{
    static std::mutex mutex;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mutex);
    std::ostringstream out;
    out << std::hex << std::setfill('0') << std::setw(16) << rng() << std::setw(16) << rng();
    return out.str();
}

} // namespace

std::string_view to_string(SessionStatus s)
{
    switch (s) {
    case SessionStatus::idle: return "idle";
    case SessionStatus::running: return "running";
    case SessionStatus::finished: return "finished";
    case SessionStatus::failed: return "failed";
    }
    return "idle";
}

// ---- EventLog ----

bool EventLog::begin_run()
{
    std::lock_guard lock(mutex_);
    if (running_ || closed_)
        return false;
    running_ = true;
    return true;
}

bool EventLog::running() const
{
    std::lock_guard lock(mutex_);
    return running_;
}

StepEvent EventLog::append(EventKind kind, std::optional<int> step, Json payload)
{
    StepEvent e;
    {
        std::lock_guard lock(mutex_);
        if (!running_)
            throw InvariantViolation(std::string("event ") + std::string(to_string(kind)) + " outside a running instruction");
        e.seq = static_cast<long>(events_.size()) + 1;
        e.kind = kind;
        e.step_index = step;
        e.payload = std::move(payload);
        e.at = std::chrono::system_clock::now();
        events_.push_back(e);
        if (is_terminal(kind)) {
            running_ = false;
            last_terminal_ = kind;
        }
    }
    changed_.notify_all();
    return e;
}

std::vector<StepEvent> EventLog::since(long from_seq) const
{
    std::lock_guard lock(mutex_);
    auto first = static_cast<std::size_t>(std::max(0L, from_seq));
    if (first >= events_.size())
        return {};
    return {events_.begin() + static_cast<std::ptrdiff_t>(first), events_.end()};
}

std::vector<StepEvent> EventLog::wait_since(long from_seq, std::chrono::milliseconds timeout) const
{
    std::unique_lock lock(mutex_);
    auto first = static_cast<std::size_t>(std::max(0L, from_seq));
    changed_.wait_for(lock, timeout, [&] { return closed_ || events_.size() > first || (!running_ && last_terminal_); });
    if (first >= events_.size())
        return {};
    return {events_.begin() + static_cast<std::ptrdiff_t>(first), events_.end()};
}

bool EventLog::drained(long cursor) const
{
    std::lock_guard lock(mutex_);
    if (closed_)
        return cursor >= static_cast<long>(events_.size());
    return !running_ && last_terminal_ && cursor >= static_cast<long>(events_.size());
}

long EventLog::last_seq() const
{
    std::lock_guard lock(mutex_);
    return static_cast<long>(events_.size());
}

std::optional<EventKind> EventLog::last_terminal() const
{
    std::lock_guard lock(mutex_);
    return last_terminal_;
}

void EventLog::close()
{
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    changed_.notify_all();
}

bool EventLog::closed() const
{
    std::lock_guard lock(mutex_);
    return closed_;
}

// ---- Session ----

Session::Session(std::string id, std::unique_ptr<browser::PageDriver> driver, llm::ModelSet models,
                 agents::EpisodeConfig episode_defaults)
    : id_(std::move(id)), browser_(driver->session()), driver_(std::move(driver)), models_(std::move(models)),
      episode_defaults_(std::move(episode_defaults))
{
}

Session::~Session()
{
    shutdown();
}

SessionStatus Session::status() const
{
    if (events_.running())
        return SessionStatus::running;
    auto last = events_.last_terminal();
    if (!last)
        return SessionStatus::idle;
    return *last == EventKind::done ? SessionStatus::finished : SessionStatus::failed;
}

std::string Session::submit(Instruction instruction, std::shared_ptr<memory::WorkflowStore> memory)
{
    if (!events_.begin_run())
        throw Conflict(events_.closed() ? "session is closed" : "an instruction is already running on this session");
    if (worker_.joinable())
        worker_.join();   // previous run already emitted its terminal event
    std::string instruction_id = id_ + "-" + std::to_string(++instructions_);
    {
        std::lock_guard lock(state_mutex_);
        goal_ = instruction.goal;
        plan_ = instruction.plan ? to_json(*instruction.plan) : Json(nullptr);
        instruction_id_ = instruction_id;
        steps_ = 0;
        trajectory_.reset();
    }
    cancel_ = false;
    worker_ = std::thread([this, instruction = std::move(instruction), memory = std::move(memory)]() mutable {
        run(std::move(instruction), std::move(memory));
    });
    return instruction_id;
}

void Session::record(EventKind kind, std::optional<int> step, const Json& payload)
{
    std::lock_guard lock(state_mutex_);
    if ((kind == EventKind::plan_generated || kind == EventKind::replanned) && payload.contains("plan"))
        plan_ = payload["plan"];
    if (kind == EventKind::action_executed)
        ++steps_;
    if ((kind == EventKind::done || kind == EventKind::error) && payload.contains("trajectory")) {
        trajectory_ = payload["trajectory"];
        steps_ = payload["trajectory"].value("steps", Json::array()).size();
    }
    (void)step;
}

void Session::run(Instruction instruction, std::shared_ptr<memory::WorkflowStore> memory)
{
    EventSink sink = [this](EventKind kind, std::optional<int> step, Json payload) {
        record(kind, step, payload);
        events_.append(kind, step, std::move(payload));
    };
    try {
        if (auto* search_cfg = std::get_if<search::SearchConfig>(&instruction.run)) {
            search::run_search(instruction.goal, instruction.plan, *search_cfg, {*driver_, models_, sink, &cancel_});
        } else {
            auto const& cfg = std::get<agents::EpisodeConfig>(instruction.run);
            agents::run_episode(instruction.goal, instruction.plan, cfg,
                                {*driver_, models_, memory.get(), sink, &cancel_});
        }
    } catch (const std::exception& e) {
        if (events_.running())
            sink(EventKind::error, std::nullopt, {{"message", e.what()}});
    }
    if (events_.running())
        sink(EventKind::error, std::nullopt, {{"message", "run ended without a terminal event"}});
}

Json Session::summary() const
{
    Json j;
    j["session_id"] = id_;
    j["status"] = to_string(status());
    j["last_seq"] = events_.last_seq();
    j["live_view_url"] = browser_.live_view_url ? Json(*browser_.live_view_url) : Json(nullptr);
    j["browser"] = to_json(browser_.config);
    std::lock_guard lock(state_mutex_);
    j["steps"] = steps_;
    j["goal"] = goal_ ? to_json(*goal_) : Json(nullptr);
    j["plan"] = plan_;
    j["instruction_id"] = instruction_id_.empty() ? Json(nullptr) : Json(instruction_id_);
    j["trajectory"] = trajectory_ ? *trajectory_ : Json(nullptr);
    return j;
}

void Session::shutdown()
{
    cancel_ = true;
    events_.close();
    if (worker_.joinable())
        worker_.join();
    driver_.reset();
}

// ---- SessionManager ----

SessionManager::SessionManager(ServiceOptions options) : options_(std::move(options))
{
    if (!options_.open_driver)
        options_.open_driver = [](const browser::BrowserEnvironmentConfig& env) -> std::unique_ptr<browser::PageDriver> {
            return browser::CdpPage::open(env);
        };
    if (!options_.make_models)
        options_.make_models = [] { return llm::http_models_from_env(); };
}

SessionManager::~SessionManager()
{
    std::map<std::string, std::shared_ptr<Session>> doomed;
    {
        std::lock_guard lock(mutex_);
        doomed.swap(sessions_);
    }
    for (auto& [id, s] : doomed)
        s->shutdown();
}

std::shared_ptr<Session> SessionManager::create(const browser::BrowserEnvironmentConfig& env,
                                               const std::optional<agents::EpisodeConfig>& episode_defaults)
{
    auto models = options_.make_models();
    auto driver = options_.open_driver(env);
    auto session = std::make_shared<Session>(random_id(), std::move(driver), std::move(models),
                                             episode_defaults.value_or(options_.episode_defaults));
    std::lock_guard lock(mutex_);
    sessions_.emplace(session->id(), session);
    return session;
}

std::shared_ptr<Session> SessionManager::get(const std::string& id) const
{
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end())
        throw NotFound("unknown session: " + id);
    return it->second;
}

std::string SessionManager::submit(const std::string& id, const Json& body)
{
    auto session = get(id);
    auto instruction = instruction_from_json(body, session->episode_defaults());
    return session->submit(std::move(instruction), options_.memory);
}

std::size_t SessionManager::size() const
{
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

bool SessionManager::remove(const std::string& id)
{
    std::shared_ptr<Session> session;
    {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end())
            return false;
        session = std::move(it->second);
        sessions_.erase(it);
    }
    session->shutdown();
    return true;
}

} // namespace webpilot::service
