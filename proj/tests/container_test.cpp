#include <gtest/gtest.h>

#include "rawnoise/container.hpp"
#include "test_support.hpp"

namespace rawnoise {
namespace {

using testing::random_frame;
using testing::TempDir;

ErrorCode decode_error(std::span<const std::uint8_t> bytes) {
  try {
    decode_container(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode unexpectedly succeeded";
  return ErrorCode::input;
}

RawFrame sample_frame() {
  RawFrame f = random_frame(16, 8, 3, "GRBG", 4095.0);
  f.meta.black_level = {64, 65, 66, 67};
  f.meta.iso = 3200;
  f.meta.exposure_time = 0.1;
  f.meta.system_gain_k = 1.37;
  f.attributes["note"] = "hello world";
  return f;
}

TEST(Container, FrameRoundTripOnDisk) {
  TempDir dir;
  const RawFrame f = sample_frame();
  write_frame(f, dir / "f.rawc");
  EXPECT_EQ(read_frame(dir / "f.rawc"), f);
  EXPECT_FALSE(std::filesystem::exists(dir / "f.rawc.partial"));
}

TEST(Container, HeaderLayout) {
  const auto bytes = encode_container(to_container(sample_frame()));
  ASSERT_GE(bytes.size(), kContainerHeaderSize);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "RNCF");
  EXPECT_EQ(bytes[8], 1);   // major version
  EXPECT_EQ(bytes[12], 1);  // mosaic
  EXPECT_EQ(bytes[14], 1);  // u16
  EXPECT_EQ(bytes[16], 1);  // one plane
  EXPECT_EQ(bytes[20], 16);
  EXPECT_EQ(bytes[24], 8);
  const std::uint64_t payload = detail::get_le<std::uint64_t>(bytes.data() + 40);
  EXPECT_EQ(payload, 16u * 8u * 2u);
  const std::uint64_t meta = detail::get_le<std::uint64_t>(bytes.data() + 32);
  EXPECT_EQ(bytes.size(), kContainerHeaderSize + meta + payload + 4);
}

TEST(Container, RealFrameUsesF32) {
  RawFrame f = sample_frame();
  f = subtract_black(f);
  f.pixels.data[0] = -1.25;
  const Container c = to_container(f);
  EXPECT_EQ(c.encoding, SampleEncoding::f32);
  EXPECT_EQ(frame_from_container(decode_container(encode_container(c))), f);
}

TEST(Container, PackedRoundTrip) {
  const PackedImage p = pack_bayer(sample_frame());
  EXPECT_EQ(packed_from_container(decode_container(encode_container(to_container(p)))), p);
}

TEST(Container, TruncatedFileFails) {
  const auto bytes = encode_container(to_container(sample_frame()));
  for (std::size_t len : {std::size_t{0}, std::size_t{10}, std::size_t{63}, bytes.size() / 2, bytes.size() - 1})
    EXPECT_EQ(decode_error(std::span(bytes.data(), len)), ErrorCode::truncated) << len;
}

TEST(Container, PayloadBitFlipIsChecksumError) {
  auto bytes = encode_container(to_container(sample_frame()));
  bytes[bytes.size() - 10] ^= 0x01;
  EXPECT_EQ(decode_error(bytes), ErrorCode::checksum);
}

TEST(Container, HeaderCorruption) {
  auto bytes = encode_container(to_container(sample_frame()));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(decode_error(bad_magic), ErrorCode::corrupt_header);
  auto bad_field = bytes;
  bad_field[20] ^= 0x40;
  EXPECT_EQ(decode_error(bad_field), ErrorCode::corrupt_header);
}

TEST(Container, UnsupportedVersion) {
  auto bytes = encode_container(to_container(sample_frame()));
  bytes[8] = 2;
  const std::uint32_t crc = detail::crc32(bytes.data(), 60);
  for (int i = 0; i < 4; ++i) bytes[60 + i] = static_cast<std::uint8_t>(crc >> (8 * i));
  EXPECT_EQ(decode_error(bytes), ErrorCode::version_unsupported);
}

TEST(Container, MissingFileIsIoError) {
  TempDir dir;
  try {
    read_frame(dir / "nope.rawc");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::io);
  }
}

TEST(Container, RejectsNewlineInMetadata) {
  RawFrame f = sample_frame();
  f.attributes["bad"] = "line\nbreak";
  EXPECT_THROW(encode_container(to_container(f)), Error);
}

TEST(Container, WrongKindRejected) {
  const Container c = to_container(pack_bayer(sample_frame()));
  EXPECT_THROW(frame_from_container(c), Error);
}

// 100 random frames (sizes, CFA, white level, kind) round-trip with zero mismatches.
TEST(Container, FuzzedRoundTrip) {
  const char* patterns[] = {"RGGB", "BGGR", "GRBG", "GBRG"};
  const double whites[] = {255.0, 1023.0, 4095.0, 16383.0, 65535.0};
  CounterEngine eng = RandomSource(99).engine();
  int mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const auto w = static_cast<std::uint32_t>(2 * (1 + std::floor(eng.uniform() * 64)));
    const auto h = static_cast<std::uint32_t>(2 * (1 + std::floor(eng.uniform() * 64)));
    RawFrame f = random_frame(w, h, 500 + i, patterns[i % 4], whites[i % 5]);
    f.meta.iso = 100u << (i % 9);
    if (i % 3 == 0) {
      f = subtract_black(f);
      for (double& v : f.pixels.data) v = static_cast<float>(v * 0.5 - 3.3);
    }
    mismatches += frame_from_container(decode_container(encode_container(to_container(f)))) != f;
  }
  EXPECT_EQ(mismatches, 0);
}

}  // namespace
}  // namespace rawnoise
