// SPDX-License-Identifier: Apache-2.0
#include "webpilot/replay/replay.hpp"

namespace webpilot::replay {

ReplayResult replay(const Trajectory& t, browser::PageDriver& driver)
{
    ReplayResult out{driver.navigate(t.goal().starting_url()), {}, {}, {}};
    if (!out.navigation.ok()) {
        if (!t.empty())
            out.divergence = 0;
        out.final_url = driver.current_url();
        return out;
    }
    for (std::size_t i = 0; i < t.steps().size(); ++i) {
        auto const& step = t.steps()[i];
        if (!step.grounded()) {
            out.records.push_back(EvaluationRecord::failure("not replayed: the step was never grounded"));
            continue;
        }
        auto record = driver.execute(*step.grounded());
        bool diverged = step.evaluation().ok() && !record.ok();
        out.records.push_back(std::move(record));
        if (diverged) {
            out.divergence = i;
            break;
        }
    }
    out.final_url = driver.current_url();
    return out;
}

} // namespace webpilot::replay
