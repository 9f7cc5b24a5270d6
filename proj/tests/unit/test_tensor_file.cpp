#include <doctest.h>

#include <cstring>

#include "relamix/errors.hpp"
#include "relamix/tensor_file.hpp"
#include "unit/helpers.hpp"

using namespace relamix;

TEST_SUITE("tensor_file") {

TEST_CASE("header layout is little-endian and 14 bytes") {
  Eigen::MatrixXf m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const auto bytes = encode_tensor(m);
  REQUIRE(bytes.size() == 14 + 6 * 4);
  CHECK(std::memcmp(bytes.data(), "RMFX", 4) == 0);
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 2);  // rows
  CHECK(bytes[10] == 3); // cols
  // Row-major: the second value on disk is m(0, 1) == 2.0f == 0x40000000.
  CHECK(bytes[18] == 0x00);
  CHECK(bytes[21] == 0x40);
}

TEST_CASE("round trip preserves every bit") {
  Eigen::MatrixXf m(3, 2);
  m << -0.0f, 1.5f, 3.25e-20f, -7.f, 1e30f, 0.1f;
  const auto back = decode_tensor(encode_tensor(m), "mem");
  REQUIRE(back.rows() == 3);
  REQUIRE(back.cols() == 2);
  CHECK(std::memcmp(back.data(), m.data(), sizeof(float) * 6) == 0);
}

TEST_CASE("corrupt inputs name the source") {
  Eigen::MatrixXf m = Eigen::MatrixXf::Ones(2, 2);
  auto bytes = encode_tensor(m);

  auto truncated = bytes;
  truncated.resize(10);
  CHECK_THROWS_WITH_AS(decode_tensor(truncated, "a.rmfx"), doctest::Contains("a.rmfx"),
                       FormatError);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_WITH_AS(decode_tensor(bad_magic, "b.rmfx"), doctest::Contains("magic"),
                       FormatError);

  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_WITH_AS(decode_tensor(bad_version, "c.rmfx"), doctest::Contains("version"),
                       FormatError);

  auto short_payload = bytes;
  short_payload.pop_back();
  CHECK_THROWS_WITH_AS(decode_tensor(short_payload, "d.rmfx"), doctest::Contains("d.rmfx"),
                       FormatError);
}

TEST_CASE("files and atomic writes") {
  testing::TempDir tmp("tensor");
  Eigen::MatrixXf m = Eigen::MatrixXf::Random(4, 5);
  write_tensor_file(tmp / "x.rmfx", m);
  CHECK(read_tensor_file(tmp / "x.rmfx") == m);
  CHECK_THROWS_AS(read_tensor_file(tmp / "missing.rmfx"), FormatError);

  write_file_atomic(tmp / "t.txt", "hello");
  CHECK(testing::slurp(tmp / "t.txt") == "hello");
  CHECK_FALSE(std::filesystem::exists(tmp / "t.txt.tmp"));
}

TEST_CASE("fnv1a64 reference values") {
  // Published FNV-1a 64-bit test vectors.
  CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar", 6) == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

}  // TEST_SUITE
