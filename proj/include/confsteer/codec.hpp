#pragma once

#include "confsteer/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace confsteer {

/// Standard CRC-32 (reflected polynomial 0xEDB88320, as in zlib/PNG).
std::uint32_t crc32(std::span<const std::byte> bytes);

std::string base64_encode(std::span<const std::byte> bytes);
std::vector<std::byte> base64_decode(std::string_view text);

/// Float vectors travel as base64 of little-endian IEEE-754 float32.
std::string encode_f32(const VectorXd &v);
VectorXd decode_f32(std::string_view b64);

/// Shortest decimal that round-trips the double exactly.
std::string format_double(double v);

} // namespace confsteer
