#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vqwave/error.hpp"
#include "vqwave/model_config.hpp"

namespace vqwave {

// Compressed file layout (all multi-byte fields little-endian):
//
//   offset size field
//   0      4    magic "VQWB"
//   4      1    version (1)
//   5      4    sample_rate (Hz)
//   9      2    latent_rate (Hz)
//   11     1    num_speech_codebooks
//   12     1    bits_per_code (always 9)
//   13     2    speaker_index
//   15     4    frame_count
//   19     ...  payload
//
// The payload holds frame_count * num_speech_codebooks indices, 9 bits each,
// written MSB-first into consecutive bytes. Frames appear in time order and
// inside a frame the indices follow codebook (head) order. The last byte is
// zero-padded.

inline constexpr char kBitstreamMagic[4] = {'V', 'Q', 'W', 'B'};
inline constexpr std::uint8_t kBitstreamVersion = 1;
inline constexpr int kBitsPerCode = 9;
inline constexpr int kMaxCodeIndex = (1 << kBitsPerCode) - 1;
inline constexpr std::size_t kBitstreamHeaderBytes = 19;

struct BitstreamHeader {
  std::uint32_t sample_rate = 16000;
  std::uint16_t latent_rate = 50;
  std::uint8_t num_speech_codebooks = 3;
  std::uint8_t bits_per_code = kBitsPerCode;
  std::uint16_t speaker_index = 0;
  std::uint32_t frame_count = 0;

  bool operator==(const BitstreamHeader&) const = default;
};

class BitstreamError : public Error {
 public:
  enum class Code { BadMagic, UnsupportedVersion, Truncated, TrailingData, IndexOverflow, BadHeader };
  BitstreamError(Code code, const std::string& what) : Error(ErrorKind::InvalidInput, what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

struct UnpackedStream {
  BitstreamHeader header;
  std::vector<int> indices;  // frame_count * num_speech_codebooks, frame-major

  std::span<const int> frame(std::size_t t) const {
    const std::size_t h = header.num_speech_codebooks;
    return std::span<const int>(indices).subspan(t * h, h);
  }
};

/// Number of payload bytes for a header.
std::size_t payload_bytes(const BitstreamHeader& header);

/// Serialises the header and indices. `indices.size()` must equal
/// header.frame_count * header.num_speech_codebooks.
std::vector<std::uint8_t> pack(const BitstreamHeader& header, std::span<const int> indices);

UnpackedStream unpack(std::span<const std::uint8_t> bytes);

/// Speech payload bitrate in bits per second (speaker code excluded).
double bitrate(const QuantizerConfig& cfg, double latent_rate);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace vqwave
