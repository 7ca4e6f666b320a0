// SPDX-License-Identifier: Apache-2.0
#include "webpilot/memory/workflow_memory.hpp"

#include "webpilot/core/events.hpp"
#include "webpilot/core/url.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <regex>
#include <set>

namespace webpilot::memory {

void validate(const WorkflowMemoryEntry& e)
{
    if (e.task_summary.empty())
        throw InvariantViolation("workflow task summary must not be empty");
    if (e.task_summary.find('\n') != std::string::npos)
        throw InvariantViolation("workflow task summary must be one line");
    if (e.steps.empty())
        throw InvariantViolation("workflow needs at least one step");
    if (e.use_count < 0)
        throw InvariantViolation("workflow use count must be non-negative");
}

Json to_json(const WorkflowMemoryEntry& e)
{
    Json j;
    j["task_summary"] = e.task_summary;
    j["domain"] = e.domain;
    j["steps"] = e.steps;
    j["created_at"] = format_timestamp(e.created_at);
    j["use_count"] = e.use_count;
    return j;
}

WorkflowMemoryEntry workflow_from_json(const Json& j)
{
    try {
        WorkflowMemoryEntry e;
        e.task_summary = j.at("task_summary").get<std::string>();
        e.domain = j.at("domain").get<std::string>();
        e.steps = j.at("steps").get<std::vector<std::string>>();
        auto at = parse_timestamp(j.at("created_at").get<std::string>());
        if (!at)
            throw ParseError("bad created_at timestamp");
        e.created_at = *at;
        e.use_count = j.at("use_count").get<int>();
        validate(e);
        return e;
    } catch (const Json::exception& ex) {
        throw ParseError(std::string("malformed workflow record: ") + ex.what());
    }
}

std::string abstract_step(std::string_view text)
{
    static const std::regex url(R"((?:https?|file|ftp)://[^\s"']+)");
    static const std::regex value(R"(\b(with|option) "(?:[^"\\]|\\.)*")");
    static const std::regex id(R"(\b\d{3,}\b)");
    auto out = std::regex_replace(std::string(text), url, "{url}");
    out = std::regex_replace(out, value, "$1 {value}");
    return std::regex_replace(out, id, "{id}");
}

std::optional<WorkflowMemoryEntry> induce_workflow(const Trajectory& t, std::chrono::system_clock::time_point created_at)
{
    WorkflowMemoryEntry e;
    for (auto const& step : t.steps())
        if (step.evaluation().ok())
            e.steps.push_back(abstract_step(step.action().text()));
    if (e.steps.empty())
        return std::nullopt;
    auto summary = t.goal().text();
    std::replace(summary.begin(), summary.end(), '\n', ' ');
    e.task_summary = truncate_utf8(summary, 200);
    e.domain = url_hostname(t.goal().starting_url());
    e.created_at = std::chrono::time_point_cast<std::chrono::milliseconds>(created_at);
    return e;
}

std::vector<std::string> tokenize(std::string_view text)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || u >= 0x80) {
            cur += static_cast<char>(std::tolower(u));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty())
        out.push_back(std::move(cur));
    return out;
}

double retrieval_score(const Goal& goal, const WorkflowMemoryEntry& entry)
{
    double score = 0.0;
    if (!entry.domain.empty() && url_hostname(goal.starting_url()) == entry.domain)
        score += 1.0;
    auto a_tokens = tokenize(goal.text());
    auto b_tokens = tokenize(entry.task_summary);
    std::set<std::string> a(a_tokens.begin(), a_tokens.end()), b(b_tokens.begin(), b_tokens.end());
    std::size_t common = 0;
    for (auto const& tok : a)
        common += b.count(tok);
    std::size_t all = a.size() + b.size() - common;
    if (all > 0)
        score += static_cast<double>(common) / static_cast<double>(all);
    return score;
}

std::vector<WorkflowMemoryEntry> retrieve(const Goal& goal, const std::vector<WorkflowMemoryEntry>& store,
                                          std::size_t top_n)
{
    if (top_n == 0)
        throw PreconditionError("top_n must be positive");
    std::vector<std::size_t> order(store.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> scores;
    for (auto const& e : store)
        scores.push_back(retrieval_score(goal, e));
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (scores[x] != scores[y])
            return scores[x] > scores[y];
        if (store[x].created_at != store[y].created_at)
            return store[x].created_at > store[y].created_at;
        return x > y;
    });
    std::vector<WorkflowMemoryEntry> out;
    for (std::size_t i = 0; i < order.size() && out.size() < top_n; ++i)
        out.push_back(store[order[i]]);
    return out;
}

LoadedStore load_store(const std::filesystem::path& path)
{
    LoadedStore out;
    std::ifstream in(path);
    if (!in) {
        if (std::filesystem::exists(path))
            throw Error("cannot read workflow store " + path.string());
        return out;
    }
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            out.entries.push_back(workflow_from_json(Json::parse(line)));
        } catch (const Json::exception&) {
            ++out.malformed_lines;
        } catch (const Error&) {
            ++out.malformed_lines;
        }
    }
    return out;
}

void store_append(const WorkflowMemoryEntry& entry, const std::filesystem::path& path)
{
    validate(entry);
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::app);
    if (!out)
        throw Error("cannot open workflow store " + path.string() + " for appending");
    out << to_json(entry).dump() << '\n';
    out.flush();
    if (!out)
        throw Error("failed writing workflow store " + path.string());
}

std::filesystem::path default_store_path()
{
    if (auto const* p = std::getenv("AWM_STORE_PATH"); p && *p)
        return p;
    return "./awm_store.jsonl";
}

LoadedStore WorkflowStore::snapshot() const
{
    std::lock_guard lock(mutex_);
    return load_store(path_);
}

void WorkflowStore::append(const WorkflowMemoryEntry& entry)
{
    std::lock_guard lock(mutex_);
    store_append(entry, path_);
}

} // namespace webpilot::memory
