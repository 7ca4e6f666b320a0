// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "webpilot/browser/page_driver.hpp"

#include <optional>
#include <vector>

namespace webpilot::replay {

struct ReplayResult {
    EvaluationRecord navigation;
    std::vector<EvaluationRecord> records;    // one per replayed step
    std::string final_url;
    std::optional<std::size_t> divergence;     // step that succeeded when recorded but failed now

    bool diverged() const { return divergence.has_value(); }
};

/// Navigates to the goal's starting URL and re-executes each recorded GroundedAction verbatim.
/// Steps recorded without a grounded action are skipped with a failure record. Stops at the
/// first divergence. A failed initial navigation counts as divergence at step 0 with no records.
ReplayResult replay(const Trajectory& t, browser::PageDriver& driver);

} // namespace webpilot::replay
