// SPDX-License-Identifier: Apache-2.0
#include "webpilot/core/encoding.hpp"

#include "webpilot/core/errors.hpp"

#include <openssl/evp.h>

namespace webpilot {

std::string base64_encode(const std::vector<std::uint8_t>& bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    auto n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text)
{
    if (text.size() % 4 != 0)
        throw ParseError("base64 input length is not a multiple of 4");
    std::vector<std::uint8_t> out(3 * (text.size() / 4));
    auto n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
    if (n < 0)
        throw ParseError("malformed base64 input");
    // EVP_DecodeBlock counts padding as decoded zero bytes.
    std::size_t padding = 0;
    if (!text.empty() && text.back() == '=')
        padding = text.size() >= 2 && text[text.size() - 2] == '=' ? 2 : 1;
    out.resize(static_cast<std::size_t>(n) - padding);
    return out;
}

} // namespace webpilot
