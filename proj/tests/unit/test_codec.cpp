#include "doctest.h"
#include "oracles.hpp"

#include "confsteer/codec.hpp"
#include "confsteer/rng.hpp"

#include <cstring>
#include <set>

using namespace confsteer;

namespace {
std::vector<std::byte> bytes_of(std::string_view s) {
  std::vector<std::byte> out(s.size());
  std::memcpy(out.data(), s.data(), s.size());
  return out;
}
} // namespace

TEST_SUITE("codec") {

TEST_CASE("crc32 check value") {
  CHECK(crc32(bytes_of("123456789")) == 0xCBF43926u);
  CHECK(crc32(bytes_of("")) == 0u);
}

TEST_CASE("crc32 agrees with the bitwise oracle") {
  Xoshiro256 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::byte> buf(static_cast<std::size_t>(rng() % 300));
    for (auto &b : buf)
      b = static_cast<std::byte>(rng() & 0xFF);
    CHECK(crc32(buf) ==
          oracle::crc32(reinterpret_cast<const unsigned char *>(buf.data()), buf.size()));
  }
}

TEST_CASE("base64 round trip and known vectors") {
  CHECK(base64_encode(bytes_of("foobar")) == "Zm9vYmFy");
  CHECK(base64_encode(bytes_of("fo")) == "Zm8=");
  CHECK(base64_encode(bytes_of("f")) == "Zg==");
  const auto back = base64_decode("Zm9vYg==");
  CHECK(std::string(reinterpret_cast<const char *>(back.data()), back.size()) == "foob");
  CHECK_THROWS_AS(base64_decode("abc"), ValidationError);
  CHECK_THROWS_AS(base64_decode("ab!="), ValidationError);
}

TEST_CASE("float32 vectors survive encoding") {
  VectorXd v(4);
  v << 1.5, -0.25, 3.0, 0.0;
  CHECK(decode_f32(encode_f32(v)) == v);
  // 1.0f little-endian is 00 00 80 3f
  CHECK(encode_f32(VectorXd::Ones(1)) == "AACAPw==");
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5, 123456789.125}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(2.0) == "2");
}

}

TEST_SUITE("rng") {

TEST_CASE("splitmix64 reference outputs") {
  SplitMix64 sm(1234567);
  CHECK(sm.next() == 6457827717110365317ULL);
  CHECK(sm.next() == 3203168211198807973ULL);
  CHECK(sm.next() == 9817491932198370423ULL);
}

TEST_CASE("xoshiro256** seeded through splitmix64") {
  Xoshiro256 rng(42);
  CHECK(rng() == 1546998764402558742ULL);
  CHECK(rng() == 6990951692964543102ULL);
  CHECK(rng() == 12544586762248559009ULL);
  CHECK(rng() == 17057574109182124193ULL);
}

TEST_CASE("uniform and normal moments") {
  Xoshiro256 rng(3);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sn / n == doctest::Approx(0.0).epsilon(0.01));
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("derived seeds differ by tag") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t tag = 0; tag < 100; ++tag)
    seen.insert(derive_seed(7, tag));
  CHECK(seen.size() == 100);
  CHECK(derive_seed(7, 1) == derive_seed(7, 1));
}

}
