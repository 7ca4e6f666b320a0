// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace webpilot {

struct ParsedUrl {
    std::string scheme;
    std::string host;
    std::optional<int> port;
    std::string path;   // includes query and fragment
};

/// Splits an absolute URL of the form scheme://host[:port][/path]. Scheme and host are lowercased.
std::optional<ParsedUrl> parse_absolute_url(std::string_view url);

/// True for absolute http(s) URLs with a non-empty host.
bool is_http_url(std::string_view url);

/// True for URLs a browser page may be pointed at: http(s) and file URLs plus about: and data: pages.
bool is_navigable_url(std::string_view url);

std::string url_hostname(std::string_view url);

} // namespace webpilot
