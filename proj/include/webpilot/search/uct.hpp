// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>

namespace webpilot::search {

/// Q + c * sqrt(ln(parent_visits) / N), with Q = W / N. Unvisited children score +infinity.
inline double uct_score(double total_value, int visits, int parent_visits, double exploration)
{
    if (visits <= 0)
        return std::numeric_limits<double>::infinity();
    double q = total_value / visits;
    double parent = parent_visits < 1 ? 1.0 : static_cast<double>(parent_visits);
    return q + exploration * std::sqrt(std::log(parent) / visits);
}

} // namespace webpilot::search
