// SPDX-License-Identifier: Apache-2.0
#include "webpilot/replay/selector.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <regex>

namespace webpilot::replay {

namespace {

bool has_digit_run(std::string_view s, std::size_t len)
{
    std::size_t run = 0;
    for (char c : s) {
        run = std::isdigit(static_cast<unsigned char>(c)) ? run + 1 : 0;
        if (run >= len)
            return true;
    }
    return false;
}

bool has_base64_run(std::string_view s)
{
    std::size_t i = 0;
    while (i < s.size()) {
        if (!std::isalnum(static_cast<unsigned char>(s[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        bool upper = false, lower = false, digit = false;
        while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j]))) {
            auto c = static_cast<unsigned char>(s[j]);
            upper |= std::isupper(c) != 0;
            lower |= std::islower(c) != 0;
            digit |= std::isdigit(c) != 0;
            ++j;
        }
        if (j - i >= 8 && upper && lower && digit)
            return true;
        i = j;
    }
    return false;
}

bool starts_with_ci(std::string_view s, std::string_view prefix)
{
    if (s.size() < prefix.size())
        return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i])
            return false;
    return true;
}

std::string hex_escape(unsigned char c)
{
    char buf[8];
    std::snprintf(buf, sizeof buf, "\\%x ", c);
    return buf;
}

bool is_root_tag(std::string_view tag) { return tag == "html" || tag == "body" || tag == "head"; }

std::string positional(const ElementInfo& e)
{
    if (is_root_tag(e.tag))
        return e.tag;
    return e.tag + ":nth-of-type(" + std::to_string(e.sibling_index) + ")";
}

std::string join_path(const std::vector<std::string>& segments)
{
    std::string out;
    for (auto const& s : segments) {
        if (!out.empty())
            out += " > ";
        out += s;
    }
    return out;
}

std::optional<std::string> stable(const std::optional<std::string>& v)
{
    if (v && !v->empty() && is_stable_identifier(*v))
        return v;
    return std::nullopt;
}

std::vector<std::pair<std::string, std::string>> attribute_qualifiers(const SelectorNode& node)
{
    std::vector<std::pair<std::string, std::string>> out;
    auto add = [&](const char* name, const std::optional<std::string>& v) {
        if (auto s = stable(v))
            out.emplace_back(name, *s);
    };
    add("name", node.info.name_attr);
    add("aria-label", node.info.aria_label);
    add("role", node.info.role);
    add("type", node.info.type_attr);
    add("data-testid", node.test_id);
    return out;
}

std::string qualifier(const std::pair<std::string, std::string>& attr)
{
    return "[" + attr.first + "=" + css_quote(attr.second) + "]";
}

} // namespace

bool is_stable_identifier(std::string_view s)
{
    if (s.empty())
        return false;
    if (has_digit_run(s, 4))
        return false;
    static const std::regex uuid("[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}");
    if (std::regex_search(s.begin(), s.end(), uuid))
        return false;
    for (auto prefix : {"ember-", "radix-", "react-", ":r", "ng-"})
        if (starts_with_ci(s, prefix))
            return false;
    return !has_base64_run(s);
}

std::string css_escape(std::string_view ident)
{
    std::string out;
    if (ident == "-")
        return "\\-";
    for (std::size_t i = 0; i < ident.size(); ++i) {
        auto c = static_cast<unsigned char>(ident[i]);
        if (c == 0) {
            out += "\xEF\xBF\xBD";
        } else if ((c >= 0x01 && c <= 0x1F) || c == 0x7F) {
            out += hex_escape(c);
        } else if (i == 0 && std::isdigit(c)) {
            out += hex_escape(c);
        } else if (i == 1 && std::isdigit(c) && ident[0] == '-') {
            out += hex_escape(c);
        } else if (c >= 0x80 || c == '-' || c == '_' || std::isalnum(c)) {
            out += static_cast<char>(c);
        } else {
            out += '\\';
            out += static_cast<char>(c);
        }
    }
    return out;
}

std::string css_quote(std::string_view value)
{
    std::string out = "\"";
    for (char c : value) {
        if (c == '"' || c == '\\') {
            out += '\\';
            out += c;
        } else if (c == '\n') {
            out += "\\a ";
        } else {
            out += c;
        }
    }
    out += '"';
    return out;
}

std::string unique_selector(const ElementChain& chain, const SelectorQuery& query)
{
    if (chain.empty())
        throw SelectorError("element chain is empty");
    auto const& target = chain.front();
    auto unique = [&](const std::string& sel) { return query(sel).unique_to_target(); };

    // Stable id.
    if (auto id = stable(target.info.id_attr)) {
        auto sel = "#" + css_escape(*id);
        if (unique(sel))
            return sel;
    }

    // Tag plus attribute qualifiers, accumulated in priority order.
    std::string base = target.info.tag;
    if (unique(base))
        return base;
    for (auto const& attr : attribute_qualifiers(target)) {
        base += qualifier(attr);
        if (unique(base))
            return base;
    }

    // Sibling position, then positional ancestors nearest first.
    auto const leaf = is_root_tag(target.info.tag)
                        ? base
                        : base + ":nth-of-type(" + std::to_string(target.info.sibling_index) + ")";
    if (unique(leaf))
        return leaf;

    constexpr std::size_t max_ancestor_segments = 4;
    std::vector<std::string> segments{leaf};
    for (std::size_t i = 1; i < chain.size() && i <= max_ancestor_segments; ++i) {
        auto const& anc = chain[i].info;
        auto id = stable(anc.id_attr);
        segments.insert(segments.begin(), id ? "#" + css_escape(*id) : positional(anc));
        auto sel = join_path(segments);
        if (unique(sel))
            return sel;
        if (id)
            break;
    }

    // Stable class names on the leaf.
    std::string classes;
    for (auto const& c : target.info.classes)
        if (is_stable_identifier(c))
            classes += "." + css_escape(c);
    if (!classes.empty()) {
        auto classed = base + classes;
        if (unique(classed))
            return classed;
        auto classed_leaf = is_root_tag(target.info.tag)
                              ? classed
                              : classed + ":nth-of-type(" + std::to_string(target.info.sibling_index) + ")";
        segments.back() = classed_leaf;
        auto sel = join_path(segments);
        if (unique(sel))
            return sel;
    }

    // Full positional path from the nearest uniquely attributed ancestor, else from the root.
    std::vector<std::string> path{leaf};
    for (std::size_t i = 1; i < chain.size(); ++i) {
        auto const& anc = chain[i];
        std::optional<std::string> anchor;
        if (auto id = stable(anc.info.id_attr)) {
            anchor = "#" + css_escape(*id);
        } else {
            for (auto const& attr : attribute_qualifiers(anc)) {
                auto sel = qualifier(attr);
                if (query(sel).count == 1) {
                    anchor = sel;
                    break;
                }
            }
        }
        if (anchor && query(*anchor).count == 1) {
            path.insert(path.begin(), *anchor);
            auto sel = join_path(path);
            if (unique(sel))
                return sel;
            path.erase(path.begin());
        }
        path.insert(path.begin(), positional(anc.info));
    }
    auto sel = join_path(path);
    if (unique(sel))
        return sel;
    throw SelectorError("could not synthesize a unique selector for <" + target.info.tag + ">");
}

} // namespace webpilot::replay
