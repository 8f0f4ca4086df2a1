#include "confsteer/codec.hpp"

#include <zlib.h>

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <limits>

namespace confsteer {

std::uint32_t crc32(std::span<const std::byte> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes a uInt length; feed large payloads in chunks.
  constexpr std::size_t kChunk = std::numeric_limits<uInt>::max() / 2;
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const std::size_t len = std::min(kChunk, bytes.size() - offset);
    crc = ::crc32(crc, reinterpret_cast<const Bytef *>(bytes.data() + offset),
                  static_cast<uInt>(len));
    offset += len;
  }
  return static_cast<std::uint32_t>(crc);
}

namespace {

constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z')
    return c - 'A';
  if (c >= 'a' && c <= 'z')
    return c - 'a' + 26;
  if (c >= '0' && c <= '9')
    return c - '0' + 52;
  if (c == '+')
    return 62;
  if (c == '/')
    return 63;
  return -1;
}

} // namespace

std::string base64_encode(std::span<const std::byte> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const auto n = (std::to_integer<std::uint32_t>(bytes[i]) << 16) |
                   (std::to_integer<std::uint32_t>(bytes[i + 1]) << 8) |
                   std::to_integer<std::uint32_t>(bytes[i + 2]);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const auto n = std::to_integer<std::uint32_t>(bytes[i]) << 16;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const auto n = (std::to_integer<std::uint32_t>(bytes[i]) << 16) |
                   (std::to_integer<std::uint32_t>(bytes[i + 1]) << 8);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::byte> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0)
    throw ValidationError("base64: length is not a multiple of 4");
  std::vector<std::byte> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::array<int, 4> v{};
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + static_cast<std::size_t>(k)];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[static_cast<std::size_t>(k)] = 0;
        ++pad;
        continue;
      }
      if (pad > 0)
        throw ValidationError("base64: data after padding");
      v[static_cast<std::size_t>(k)] = decode_char(c);
      if (v[static_cast<std::size_t>(k)] < 0)
        throw ValidationError("base64: invalid character");
    }
    const std::uint32_t n = (static_cast<std::uint32_t>(v[0]) << 18) |
                            (static_cast<std::uint32_t>(v[1]) << 12) |
                            (static_cast<std::uint32_t>(v[2]) << 6) |
                            static_cast<std::uint32_t>(v[3]);
    out.push_back(static_cast<std::byte>((n >> 16) & 0xFF));
    if (pad < 2)
      out.push_back(static_cast<std::byte>((n >> 8) & 0xFF));
    if (pad < 1)
      out.push_back(static_cast<std::byte>(n & 0xFF));
  }
  return out;
}

std::string encode_f32(const VectorXd &v) {
  std::vector<std::byte> bytes(static_cast<std::size_t>(v.size()) * 4);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v(i)));
    for (int b = 0; b < 4; ++b)
      bytes[static_cast<std::size_t>(i) * 4 + static_cast<std::size_t>(b)] =
          static_cast<std::byte>((bits >> (8 * b)) & 0xFF);
  }
  return base64_encode(bytes);
}

VectorXd decode_f32(std::string_view b64) {
  const auto bytes = base64_decode(b64);
  if (bytes.size() % 4 != 0)
    throw ValidationError("float32 payload length is not a multiple of 4");
  VectorXd v(static_cast<Eigen::Index>(bytes.size() / 4));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= std::to_integer<std::uint32_t>(
                  bytes[static_cast<std::size_t>(i) * 4 +
                        static_cast<std::size_t>(b)])
              << (8 * b);
    v(i) = static_cast<double>(std::bit_cast<float>(bits));
  }
  return v;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{})
    throw std::runtime_error("format_double failed");
  return std::string(buf.data(), ptr);
}

} // namespace confsteer
