#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace splatsim {

/// RFC 4648 base64 with padding.
std::string base64_encode(const std::uint8_t* data, std::size_t len);
inline std::string base64_encode(const std::vector<std::uint8_t>& data) {
    return base64_encode(data.data(), data.size());
}

/// Throws ParseError on characters outside the alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(const std::string& text);

} // namespace splatsim
