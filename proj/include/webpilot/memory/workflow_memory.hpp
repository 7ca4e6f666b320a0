// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/core/trajectory_io.hpp"

#include <chrono>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace webpilot::memory {

struct WorkflowMemoryEntry {
    std::string task_summary;
    std::string domain;
    std::vector<std::string> steps;
    std::chrono::system_clock::time_point created_at;
    int use_count = 0;

    bool operator==(const WorkflowMemoryEntry&) const = default;
};

void validate(const WorkflowMemoryEntry& e);

Json to_json(const WorkflowMemoryEntry& e);
WorkflowMemoryEntry workflow_from_json(const Json& j);

/// Replaces URLs with {url}, quoted values after `with ` / `option ` with {value}, then
/// integers of three or more digits with {id}. Quoted element labels are kept.
std::string abstract_step(std::string_view text);

/// The successful steps' action texts, abstracted. Nullopt when no step succeeded.
std::optional<WorkflowMemoryEntry> induce_workflow(const Trajectory& t,
                                                   std::chrono::system_clock::time_point created_at
                                                   = std::chrono::system_clock::now());

/// Lowercase alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Domain match (+1) plus Jaccard overlap between goal text and task summary tokens.
double retrieval_score(const Goal& goal, const WorkflowMemoryEntry& entry);

/// Highest score first; equal scores newest first (created_at, then later position in `store`).
std::vector<WorkflowMemoryEntry> retrieve(const Goal& goal, const std::vector<WorkflowMemoryEntry>& store,
                                          std::size_t top_n);

struct LoadedStore {
    std::vector<WorkflowMemoryEntry> entries;
    int malformed_lines = 0;
};

/// Reads one JSON record per line. A missing file is an empty store; bad lines are counted and skipped.
LoadedStore load_store(const std::filesystem::path& path);

/// Appends one record line. Throws Error on I/O failure.
void store_append(const WorkflowMemoryEntry& entry, const std::filesystem::path& path);

/// $AWM_STORE_PATH, else ./awm_store.jsonl
std::filesystem::path default_store_path();

/// Process-wide single writer for one store file.
class WorkflowStore {
public:
    explicit WorkflowStore(std::filesystem::path path) : path_(std::move(path)) {}

    const std::filesystem::path& path() const { return path_; }
    LoadedStore snapshot() const;
    void append(const WorkflowMemoryEntry& entry);

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
};

} // namespace webpilot::memory
