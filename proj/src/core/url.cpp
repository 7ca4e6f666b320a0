// SPDX-License-Identifier: Apache-2.0
#include "webpilot/core/url.hpp"

#include <algorithm>
#include <cctype>

namespace webpilot {

namespace {

std::string lower(std::string_view s)
{
    std::string out(s);
    std::ranges::transform(out, out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool valid_scheme(std::string_view s)
{
    if (s.empty() || !std::isalpha(static_cast<unsigned char>(s.front())))
        return false;
    return std::ranges::all_of(s, [](unsigned char c) { return std::isalnum(c) || c == '+' || c == '-' || c == '.'; });
}

} // namespace

std::optional<ParsedUrl> parse_absolute_url(std::string_view url)
{
    auto const sep = url.find("://");
    if (sep == std::string_view::npos || !valid_scheme(url.substr(0, sep)))
        return std::nullopt;

    ParsedUrl out;
    out.scheme = lower(url.substr(0, sep));
    auto rest = url.substr(sep + 3);
    auto const path_start = rest.find_first_of("/?#");
    auto authority = rest.substr(0, path_start);
    out.path = path_start == std::string_view::npos ? std::string("/") : std::string(rest.substr(path_start));

    if (auto at = authority.rfind('@'); at != std::string_view::npos)
        authority = authority.substr(at + 1);

    if (!authority.empty() && authority.front() == '[') {
        auto close = authority.find(']');
        if (close == std::string_view::npos)
            return std::nullopt;
        out.host = lower(authority.substr(0, close + 1));
        authority = authority.substr(close + 1);
        if (!authority.empty() && authority.front() != ':')
            return std::nullopt;
    } else {
        auto colon = authority.find(':');
        out.host = lower(authority.substr(0, colon));
        authority = colon == std::string_view::npos ? std::string_view{} : authority.substr(colon);
    }

    if (!authority.empty()) {
        auto digits = authority.substr(1);
        if (digits.empty() || digits.size() > 5
            || !std::ranges::all_of(digits, [](unsigned char c) { return std::isdigit(c); }))
            return std::nullopt;
        int port = std::stoi(std::string(digits));
        if (port > 65535)
            return std::nullopt;
        out.port = port;
    }
    return out;
}

bool is_http_url(std::string_view url)
{
    auto parsed = parse_absolute_url(url);
    if (!parsed || parsed->host.empty())
        return false;
    if (std::ranges::any_of(url, [](unsigned char c) { return std::isspace(c); }))
        return false;
    return parsed->scheme == "http" || parsed->scheme == "https";
}

bool is_navigable_url(std::string_view url)
{
    if (is_http_url(url))
        return true;
    auto const l = lower(url.substr(0, std::min<std::size_t>(url.size(), 8)));
    if (l.starts_with("about:") || l.starts_with("data:"))
        return url.size() > 6;
    auto parsed = parse_absolute_url(url);
    return parsed && parsed->scheme == "file";
}

std::string url_hostname(std::string_view url)
{
    auto parsed = parse_absolute_url(url);
    return parsed ? parsed->host : std::string{};
}

} // namespace webpilot
