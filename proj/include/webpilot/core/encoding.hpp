// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace webpilot {

std::string base64_encode(const std::vector<std::uint8_t>& bytes);

/// Throws ParseError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

} // namespace webpilot
