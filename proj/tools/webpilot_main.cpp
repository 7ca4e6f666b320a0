// SPDX-License-Identifier: Apache-2.0
// webpilot: serve the session API, run one instruction, or replay a recorded trajectory.

#include "webpilot/browser/cdp_page.hpp"
#include "webpilot/replay/replay.hpp"
#include "webpilot/service/http_service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace webpilot;

namespace {

browser::BrowserEnvironmentConfig browser_config(const std::string& cdp)
{
    browser::BrowserEnvironmentConfig cfg;
    if (!cdp.empty()) {
        cfg.mode = browser::BrowserMode::attach_cdp;
        cfg.endpoint = cdp;
    }
    return cfg;
}

llm::ModelSet models_for(const std::string& scripted)
{
    return scripted.empty() ? llm::http_models_from_env() : llm::load_scripted_models(scripted);
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw PreconditionError("cannot read " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string short_payload(EventKind kind, const Json& p)
{
    switch (kind) {
    case EventKind::action_generated: return p.value("text", "");
    case EventKind::action_grounded:
        return p.contains("grounded") && !p["grounded"].is_null() ? p["grounded"].dump()
                                                                   : "failed: " + p.value("error", "");
    case EventKind::action_executed:
        return p.contains("evaluation") ? p["evaluation"].value("status", "") + " " + p["evaluation"].value("message", "")
                                        : "";
    case EventKind::done: return p.value("reason", "");
    case EventKind::error: return p.value("message", "");
    default: return {};
    }
}

std::atomic<service::HttpService*> running_service{nullptr};

extern "C" void on_signal(int)
{
    if (auto* s = running_service.load())
        s->stop();
}

int cmd_serve(const std::string& host, int port, const std::string& scripted, const std::string& cdp,
              const std::string& store)
{
    service::ServiceOptions opts;
    opts.browser_defaults = browser_config(cdp);
    opts.make_models = [scripted] { return models_for(scripted); };
    opts.memory = std::make_shared<memory::WorkflowStore>(store.empty() ? memory::default_store_path() : std::filesystem::path(store));
    service::SessionManager sessions(std::move(opts));
    service::HttpService http(sessions);
    int bound = http.bind(host, port);
    if (bound < 0) {
        std::cerr << "cannot bind " << host << ":" << port << "\n";
        return 1;
    }
    std::cout << "listening on " << host << ":" << bound << std::endl;
    running_service = &http;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    http.serve();
    running_service = nullptr;
    return 0;
}

struct RunOptions {
    std::string goal, url, plan, agent = "function_calling", features, search, scripted, cdp, out, store;
    int max_steps = 20, branching = 2, depth = 3, iterations = 20;
    bool memory = false;
};

int cmd_run(const RunOptions& o)
{
    Json body{{"goal", o.goal}, {"url", o.url}};
    if (!o.plan.empty())
        body["plan"] = o.plan;
    if (!o.search.empty()) {
        body["search"] = {{"strategy", o.search}, {"branching", o.branching}, {"max_depth", o.depth},
                          {"iterations", o.iterations}};
        if (!o.features.empty())
            body["search"]["grounding_features"] = o.features;
    } else {
        body["episode"] = {{"agent", o.agent}, {"max_steps", o.max_steps}, {"memory_enabled", o.memory}};
        if (!o.features.empty())
            body["episode"]["grounding_features"] = o.features;
    }
    auto instruction = service::instruction_from_json(body);
    auto models = models_for(o.scripted);
    auto driver = browser::CdpPage::open(browser_config(o.cdp));

    long seq = 0;
    EventSink sink = [&](EventKind kind, std::optional<int> step, Json payload) {
        std::cout << ++seq << " " << to_string(kind);
        if (step)
            std::cout << " step=" << *step;
        auto detail = short_payload(kind, payload);
        if (!detail.empty())
            std::cout << " " << detail;
        std::cout << std::endl;
    };

    std::optional<Trajectory> trajectory;
    bool ok = true;
    if (auto* cfg = std::get_if<search::SearchConfig>(&instruction.run)) {
        auto outcome = search::run_search(instruction.goal, instruction.plan, *cfg, {*driver, models, sink});
        trajectory = outcome.best;
        ok = outcome.best.has_value();
    } else {
        std::unique_ptr<memory::WorkflowStore> store;
        if (o.memory)
            store = std::make_unique<memory::WorkflowStore>(o.store.empty() ? memory::default_store_path() : std::filesystem::path(o.store));
        auto result = agents::run_episode(instruction.goal, instruction.plan,
                                          std::get<agents::EpisodeConfig>(instruction.run),
                                          {*driver, models, store.get(), sink, nullptr});
        trajectory = result.trajectory;
        ok = result.reason != agents::TerminalReason::error;
    }
    if (trajectory && !o.out.empty()) {
        std::ofstream f(o.out, std::ios::binary);
        f << serialize_trajectory(*trajectory);
        if (!f)
            throw PreconditionError("cannot write " + o.out);
    }
    return ok ? 0 : 1;
}

int cmd_replay(const std::string& file, const std::string& cdp)
{
    auto trajectory = deserialize_trajectory(read_file(file));
    auto driver = browser::CdpPage::open(browser_config(cdp));
    auto result = replay::replay(trajectory, *driver);
    std::cout << "navigate " << trajectory.goal().starting_url() << ": "
              << (result.navigation.ok() ? "ok" : "FAILED " + result.navigation.message()) << "\n";
    auto const& steps = trajectory.steps();
    for (std::size_t i = 0; i < result.records.size(); ++i) {
        auto const& rec = result.records[i];
        bool diverged = result.divergence == i;
        std::cout << "step " << i + 1 << "/" << steps.size() << " " << (rec.ok() ? "ok" : "failed")
                  << (diverged ? " DIVERGED" : "") << " " << steps[i].action().text() << " | " << rec.message() << "\n";
    }
    if (result.diverged()) {
        std::cout << "diverged at step " << *result.divergence + 1 << "\n";
        return 2;
    }
    std::cout << "final url " << result.final_url << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Web agent orchestration engine"};
    app.require_subcommand(1);

    std::string host = "0.0.0.0", scripted, cdp, store;
    int port = 0;
    auto* serve = app.add_subcommand("serve", "Run the HTTP session API (port from --port or PORT, default 8080)");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Listen port");
    serve->add_option("--scripted-llm", scripted, "Scripted model replies (JSON) instead of a live provider");
    serve->add_option("--cdp", cdp, "Attach sessions to this DevTools endpoint by default");
    serve->add_option("--memory-store", store, "Workflow memory JSONL file");

    RunOptions ro;
    auto* run = app.add_subcommand("run", "Run one instruction without the HTTP layer");
    run->add_option("--goal", ro.goal, "Task goal")->required();
    run->add_option("--url", ro.url, "Starting URL")->required();
    run->add_option("--plan", ro.plan, "User-supplied plan");
    run->add_option("--agent", ro.agent, "function_calling | high_level_planning | context_aware_planning | prompt");
    run->add_option("--max-steps", ro.max_steps, "Step limit");
    run->add_option("--features", ro.features, "Grounding features, comma separated");
    run->add_option("--search", ro.search, "Tree search strategy: bfs | dfs | mcts");
    run->add_option("--branching", ro.branching, "Candidate actions per node");
    run->add_option("--depth", ro.depth, "Maximum search depth");
    run->add_option("--iterations", ro.iterations, "Search iterations (expansions for bfs/dfs)");
    run->add_flag("--memory", ro.memory, "Enable workflow memory");
    run->add_option("--memory-store", ro.store, "Workflow memory JSONL file");
    run->add_option("--scripted-llm", ro.scripted, "Scripted model replies (JSON)");
    run->add_option("--cdp", ro.cdp, "Attach to this DevTools endpoint instead of launching");
    run->add_option("--out", ro.out, "Write the resulting trajectory here");

    std::string file, replay_cdp;
    auto* rep = app.add_subcommand("replay", "Re-execute a recorded trajectory");
    rep->add_option("trajectory", file, "Trajectory file")->required();
    rep->add_option("--cdp", replay_cdp, "Attach to this DevTools endpoint instead of launching");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) {
            if (port == 0) {
                const char* env = std::getenv("PORT");
                port = env ? std::atoi(env) : 8080;
            }
            return cmd_serve(host, port, scripted, cdp, store);
        }
        if (*run)
            return cmd_run(ro);
        return cmd_replay(file, replay_cdp);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
