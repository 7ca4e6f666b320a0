// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <sys/types.h>

namespace webpilot::browser {

struct LaunchOptions {
    std::string executable;   // empty: locate_browser()
    bool headless = true;
    int width = 1280;
    int height = 720;
    std::vector<std::string> extra_args;
    std::chrono::milliseconds startup_timeout = std::chrono::seconds(10);
};

/// Finds a Chromium-family binary: $WEBPILOT_CHROME, $CHROME_PATH, well-known names on
/// $PATH, then /opt/chromium/chromium.
std::optional<std::filesystem::path> locate_browser();

/// A child browser process with remote debugging on an ephemeral port. Killed on destruction.
class BrowserProcess {
public:
    static std::unique_ptr<BrowserProcess> launch(const LaunchOptions& opts);
    ~BrowserProcess();

    BrowserProcess(const BrowserProcess&) = delete;
    BrowserProcess& operator=(const BrowserProcess&) = delete;

    const std::string& ws_endpoint() const { return ws_endpoint_; }
    pid_t pid() const { return pid_; }
    bool running() const;

private:
    BrowserProcess() = default;
    void terminate();

    pid_t pid_ = -1;
    std::string ws_endpoint_;
    std::filesystem::path profile_dir_;
    struct Drain;
    std::unique_ptr<Drain> drain_;
};

} // namespace webpilot::browser
