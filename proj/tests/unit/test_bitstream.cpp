#include <filesystem>
#include <random>

#include "doctest.h"
#include "vqwave/bitstream.hpp"

using namespace vqwave;

namespace {

BitstreamHeader header_for(int heads, std::uint32_t frames, int speaker = 0) {
  BitstreamHeader h;
  h.num_speech_codebooks = static_cast<std::uint8_t>(heads);
  h.frame_count = frames;
  h.speaker_index = static_cast<std::uint16_t>(speaker);
  return h;
}

std::vector<std::uint8_t> payload_of(const std::vector<std::uint8_t>& bytes) {
  return {bytes.begin() + kBitstreamHeaderBytes, bytes.end()};
}

BitstreamError::Code error_code(const std::vector<std::uint8_t>& bytes) {
  try {
    unpack(bytes);
  } catch (const BitstreamError& e) {
    return e.code();
  }
  FAIL("no error");
  return BitstreamError::Code::BadHeader;
}

}  // namespace

TEST_CASE("header layout is byte exact") {
  const auto full = pack(header_for(1, 0x0102, 0x1ab), std::vector<int>(0x0102, 0));
  const std::vector<std::uint8_t> bytes(full.begin(), full.begin() + kBitstreamHeaderBytes);
  const std::vector<std::uint8_t> expected{'V', 'Q', 'W', 'B', 1,               // magic, version
                                           0x80, 0x3e, 0x00, 0x00,             // 16000
                                           50, 0,                              // latent rate
                                           1, 9,                               // heads, bits per code
                                           0xab, 0x01,                         // speaker index
                                           0x02, 0x01, 0x00, 0x00};            // frame count
  CHECK(bytes == expected);
  CHECK(full.size() == kBitstreamHeaderBytes + (0x0102 * 9 + 7) / 8);
}

TEST_CASE("hand-packed fixtures") {
  // 000000001 000000010 111111111 000000000 + 0000 padding.
  const std::vector<int> four{1, 2, 511, 0};
  const auto bytes = pack(header_for(2, 2), four);
  CHECK(payload_of(bytes) == std::vector<std::uint8_t>{0x00, 0x80, 0xbf, 0xe0, 0x00});
  CHECK(unpack(bytes).indices == four);

  // 000000001 000000000 + 000000 padding.
  const auto two = pack(header_for(1, 2), std::vector<int>{1, 0});
  CHECK(payload_of(two) == std::vector<std::uint8_t>{0x00, 0x80, 0x00});

  const auto empty = pack(header_for(3, 0), {});
  CHECK(empty.size() == kBitstreamHeaderBytes);
  const auto u = unpack(empty);
  CHECK(u.indices.empty());
  CHECK(u.header == header_for(3, 0));
}

TEST_CASE("pack and unpack are inverse; file size law") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> code(0, 511), heads(1, 4), frames(0, 500);
  for (int trial = 0; trial < 300; ++trial) {
    const int h = heads(rng);
    const auto f = static_cast<std::uint32_t>(frames(rng));
    std::vector<int> idx(f * h);
    for (auto& v : idx) v = code(rng);
    const auto hdr = header_for(h, f, code(rng));
    const auto bytes = pack(hdr, idx);
    CHECK(bytes.size() * 8 == kBitstreamHeaderBytes * 8 + (f * h * 9 + 7) / 8 * 8);
    CHECK(payload_bytes(hdr) == (f * h * 9 + 7) / 8);
    const auto u = unpack(bytes);
    CHECK(u.header == hdr);
    CHECK(u.indices == idx);
    if (f > 0) {
      const auto last = u.frame(f - 1);
      for (int k = 0; k < h; ++k) CHECK(last[k] == idx[(f - 1) * h + k]);
    }
  }
  std::vector<int> many(1000 * 3);
  for (auto& v : many) v = code(rng);
  CHECK(unpack(pack(header_for(3, 1000), many)).indices == many);
}

TEST_CASE("distinct errors") {
  const auto good = pack(header_for(2, 2), std::vector<int>{1, 2, 3, 4});
  auto bad_magic = good;
  bad_magic[1] = 'X';
  CHECK(error_code(bad_magic) == BitstreamError::Code::BadMagic);
  auto bad_version = good;
  bad_version[4] = 2;
  CHECK(error_code(bad_version) == BitstreamError::Code::UnsupportedVersion);
  CHECK(error_code({good.begin(), good.end() - 1}) == BitstreamError::Code::Truncated);
  CHECK(error_code({good.begin(), good.begin() + 10}) == BitstreamError::Code::Truncated);
  auto trailing = good;
  trailing.push_back(0);
  CHECK(error_code(trailing) == BitstreamError::Code::TrailingData);
  auto bad_bits = good;
  bad_bits[12] = 8;
  CHECK(error_code(bad_bits) == BitstreamError::Code::BadHeader);
  auto bad_speaker = good;
  bad_speaker[14] = 2;  // speaker index 512
  CHECK(error_code(bad_speaker) == BitstreamError::Code::IndexOverflow);
  try {
    pack(header_for(1, 1), std::vector<int>{512});
    FAIL("expected overflow");
  } catch (const BitstreamError& e) {
    CHECK(e.code() == BitstreamError::Code::IndexOverflow);
  }
  CHECK_THROWS_AS(pack(header_for(2, 2), std::vector<int>{1, 2, 3}), Error);
}

TEST_CASE("bitrate") {
  QuantizerConfig q;
  q.num_speech_codebooks = 2;
  CHECK(bitrate(q, 50) == 900.0);
  q.num_speech_codebooks = 3;
  CHECK(bitrate(q, 50) == 1350.0);
  q.num_speech_codebooks = 1;
  CHECK(bitrate(q, 50) == 450.0);
}

TEST_CASE("file round trip") {
  const auto bytes = pack(header_for(2, 3, 7), std::vector<int>{5, 6, 7, 8, 9, 10});
  const auto path = (std::filesystem::temp_directory_path() / "vqwave_test.vqw").string();
  write_file_bytes(path, bytes);
  CHECK(read_file_bytes(path) == bytes);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_file_bytes(path), Error);
}
