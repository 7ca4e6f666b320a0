// SPDX-License-Identifier: Apache-2.0
#include "webpilot/browser/launcher.hpp"

#include "webpilot/browser/cdp_connection.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

extern char** environ;

namespace webpilot::browser {

namespace fs = std::filesystem;

struct BrowserProcess::Drain {
    int fd = -1;
    std::thread thread;

    ~Drain()
    {
        if (thread.joinable())
            thread.join();
        if (fd >= 0)
            ::close(fd);
    }
};

namespace {

bool executable_file(const fs::path& p)
{
    std::error_code ec;
    return fs::is_regular_file(p, ec) && ::access(p.c_str(), X_OK) == 0;
}

std::string env_or_empty(const char* name)
{
    const char* v = std::getenv(name);
    return v ? v : "";
}

fs::path make_profile_dir()
{
    std::random_device rd;
    auto dir = fs::temp_directory_path() / ("webpilot-profile-" + std::to_string(::getpid()) + "-" + std::to_string(rd()));
    fs::create_directories(dir);
    return dir;
}

} // namespace

std::optional<fs::path> locate_browser()
{
    for (auto const* var : {"WEBPILOT_CHROME", "CHROME_PATH"}) {
        auto v = env_or_empty(var);
        if (!v.empty() && executable_file(v))
            return fs::path(v);
    }
    std::stringstream path(env_or_empty("PATH"));
    std::string dir;
    std::vector<fs::path> dirs;
    while (std::getline(path, dir, ':'))
        if (!dir.empty())
            dirs.emplace_back(dir);
    for (auto const* name : {"chromium", "chromium-browser", "google-chrome", "google-chrome-stable", "chrome",
                             "headless_shell"})
        for (auto const& d : dirs)
            if (executable_file(d / name))
                return d / name;
    if (executable_file("/opt/chromium/chromium"))
        return fs::path("/opt/chromium/chromium");
    return std::nullopt;
}

std::unique_ptr<BrowserProcess> BrowserProcess::launch(const LaunchOptions& opts)
{
    fs::path exe = opts.executable;
    if (exe.empty()) {
        auto found = locate_browser();
        if (!found)
            throw LaunchError("no Chromium-family browser found; set WEBPILOT_CHROME");
        exe = *found;
    }
    if (!executable_file(exe))
        throw LaunchError("browser binary is not executable: " + exe.string());

    std::unique_ptr<BrowserProcess> proc(new BrowserProcess());
    proc->profile_dir_ = make_profile_dir();

    std::vector<std::string> args{
        exe.string(),
        "--remote-debugging-port=0",
        "--user-data-dir=" + proc->profile_dir_.string(),
        "--no-first-run",
        "--no-default-browser-check",
        "--no-sandbox",
        "--disable-gpu",
        "--use-angle=swiftshader",
        "--disable-dev-shm-usage",
        "--disable-background-networking",
        "--disable-extensions",
        "--disable-sync",
        "--mute-audio",
        "--hide-scrollbars",
        "--window-size=" + std::to_string(opts.width) + "," + std::to_string(opts.height),
    };
    if (opts.headless)
        args.emplace_back("--headless=new");
    args.insert(args.end(), opts.extra_args.begin(), opts.extra_args.end());
    args.emplace_back("about:blank");

    // Self-contained Chromium bundles ship their shared libraries next to the binary.
    std::vector<std::string> env;
    for (char** e = environ; *e; ++e)
        if (std::strncmp(*e, "LD_LIBRARY_PATH=", 16) != 0 && std::strncmp(*e, "FONTCONFIG_PATH=", 16) != 0)
            env.emplace_back(*e);
    auto const bundle = exe.parent_path();
    std::string ld = env_or_empty("LD_LIBRARY_PATH");
    if (fs::exists(bundle / "lib"))
        ld = (bundle / "lib").string() + ":" + bundle.string() + (ld.empty() ? "" : ":" + ld);
    if (!ld.empty())
        env.push_back("LD_LIBRARY_PATH=" + ld);
    // Bundled fonts.conf files tend to name directories that only exist on their build host, which
    // leaves the browser without a fallback font (fatal once a form control renders). Point
    // fontconfig at the bundle's fonts plus the system font directories instead.
    auto fontconfig = env_or_empty("FONTCONFIG_PATH");
    if (fontconfig.empty() && fs::exists(bundle / "fonts.conf")) {
        std::ofstream conf(proc->profile_dir_ / "fonts.conf");
        conf << "<?xml version=\"1.0\"?>\n<!DOCTYPE fontconfig SYSTEM \"fonts.dtd\">\n<fontconfig>\n";
        for (auto const& dir : {bundle / "fonts", fs::path("/usr/share/fonts"), fs::path("/usr/local/share/fonts")})
            if (fs::exists(dir))
                conf << "  <dir>" << dir.string() << "</dir>\n";
        conf << "  <cachedir>" << (proc->profile_dir_ / "fontcache").string() << "</cachedir>\n</fontconfig>\n";
        fontconfig = proc->profile_dir_.string();
    }
    if (!fontconfig.empty())
        env.push_back("FONTCONFIG_PATH=" + fontconfig);

    std::vector<char*> argv;
    for (auto& a : args)
        argv.push_back(a.data());
    argv.push_back(nullptr);
    std::vector<char*> envp;
    for (auto& e : env)
        envp.push_back(e.data());
    envp.push_back(nullptr);

    int pipefd[2];
    if (::pipe(pipefd) != 0)
        throw LaunchError(std::string("pipe failed: ") + std::strerror(errno));

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
    posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
    posix_spawn_file_actions_adddup2(&actions, pipefd[1], STDERR_FILENO);
    posix_spawn_file_actions_addclose(&actions, pipefd[0]);
    posix_spawn_file_actions_addclose(&actions, pipefd[1]);

    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);

    pid_t pid = -1;
    int rc = ::posix_spawn(&pid, exe.c_str(), &actions, &attr, argv.data(), envp.data());
    posix_spawn_file_actions_destroy(&actions);
    posix_spawnattr_destroy(&attr);
    ::close(pipefd[1]);
    if (rc != 0) {
        ::close(pipefd[0]);
        throw LaunchError("cannot start " + exe.string() + ": " + std::strerror(rc));
    }
    proc->pid_ = pid;

    // Read stderr until the DevTools endpoint is announced.
    static const std::regex announce(R"(DevTools listening on (ws://\S+))");
    std::string seen;
    auto const deadline = std::chrono::steady_clock::now() + opts.startup_timeout;
    while (proc->ws_endpoint_.empty()) {
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0)
            break;
        pollfd pfd{pipefd[0], POLLIN, 0};
        if (::poll(&pfd, 1, static_cast<int>(remaining.count())) <= 0)
            break;
        char buf[4096];
        auto n = ::read(pipefd[0], buf, sizeof buf);
        if (n <= 0)
            break;
        seen.append(buf, static_cast<std::size_t>(n));
        std::smatch m;
        if (std::regex_search(seen, m, announce))
            proc->ws_endpoint_ = m[1].str();
    }
    if (proc->ws_endpoint_.empty()) {
        ::close(pipefd[0]);
        auto tail = seen.size() > 600 ? seen.substr(seen.size() - 600) : seen;
        throw LaunchError("browser did not announce a DevTools endpoint: " + tail);
    }

    // Keep draining stderr so the browser never blocks on a full pipe.
    proc->drain_ = std::make_unique<Drain>();
    proc->drain_->fd = pipefd[0];
    proc->drain_->thread = std::thread([fd = pipefd[0]] {
        char buf[4096];
        while (::read(fd, buf, sizeof buf) > 0) {
        }
    });
    return proc;
}

bool BrowserProcess::running() const
{
    if (pid_ <= 0)
        return false;
    int status = 0;
    return ::waitpid(pid_, &status, WNOHANG) == 0;
}

void BrowserProcess::terminate()
{
    if (pid_ <= 0)
        return;
    ::kill(-pid_, SIGTERM);
    for (int i = 0; i < 50; ++i) {
        int status = 0;
        if (::waitpid(pid_, &status, WNOHANG) != 0) {
            pid_ = -1;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    if (pid_ > 0) {
        ::kill(-pid_, SIGKILL);
        int status = 0;
        ::waitpid(pid_, &status, 0);
        pid_ = -1;
    }
}

BrowserProcess::~BrowserProcess()
{
    terminate();
    drain_.reset();
    std::error_code ec;
    if (!profile_dir_.empty())
        fs::remove_all(profile_dir_, ec);
}

} // namespace webpilot::browser
