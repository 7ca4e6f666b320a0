// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/core/errors.hpp"
#include "webpilot/core/types.hpp"

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace webpilot::replay {

class SelectorError : public Error {
public:
    using Error::Error;
};

/// False for identifiers that look generated: runs of 4+ digits, UUIDs, framework prefixes
/// (ember-, radix-, react-, :r, ng-) and base64-like runs of 8+ mixed-case alphanumerics.
bool is_stable_identifier(std::string_view s);

/// Escapes an identifier for use after `#` or `.` (CSS.escape semantics).
std::string css_escape(std::string_view ident);

/// Double-quoted CSS attribute value.
std::string css_quote(std::string_view value);

struct SelectorNode {
    ElementInfo info;
    std::optional<std::string> test_id;   // data-testid
};

/// Target first, then each ancestor up to and including the root element.
using ElementChain = std::vector<SelectorNode>;

struct SelectorMatch {
    int count = 0;
    bool first_is_target = false;

    bool unique_to_target() const { return count == 1 && first_is_target; }
};

/// Runs a selector against the live document.
using SelectorQuery = std::function<SelectorMatch(const std::string& selector)>;

/// Synthesizes a selector that matches exactly the chain's target, trying in order:
/// a stable id; the tag with attribute qualifiers (name, aria-label, role, type, data-testid);
/// a sibling position plus up to four positional ancestor segments; stable class names;
/// and finally a full positional path from a uniquely attributed ancestor or the root.
/// Every candidate is verified through `query`. Throws SelectorError if none is unique.
std::string unique_selector(const ElementChain& chain, const SelectorQuery& query);

} // namespace webpilot::replay
