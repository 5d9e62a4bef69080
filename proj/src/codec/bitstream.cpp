#include "vqwave/bitstream.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

namespace vqwave {

namespace {

using Code = BitstreamError::Code;

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t offset, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[offset + i]) << (8 * i);
  return v;
}

void validate_header(const BitstreamHeader& h) {
  if (h.bits_per_code != kBitsPerCode) {
    throw BitstreamError(Code::BadHeader, "bitstream: bits_per_code must be 9, got " + std::to_string(h.bits_per_code));
  }
  if (h.num_speech_codebooks == 0) throw BitstreamError(Code::BadHeader, "bitstream: zero speech codebooks");
  if (h.speaker_index > kMaxCodeIndex) {
    throw BitstreamError(Code::IndexOverflow,
                         "bitstream: speaker index " + std::to_string(h.speaker_index) + " exceeds 511");
  }
}

}  // namespace

std::size_t payload_bytes(const BitstreamHeader& header) {
  const std::uint64_t bits =
      static_cast<std::uint64_t>(header.frame_count) * header.num_speech_codebooks * kBitsPerCode;
  return static_cast<std::size_t>((bits + 7) / 8);
}

std::vector<std::uint8_t> pack(const BitstreamHeader& header, std::span<const int> indices) {
  validate_header(header);
  const std::size_t expected = static_cast<std::size_t>(header.frame_count) * header.num_speech_codebooks;
  if (indices.size() != expected) {
    throw invalid_input("bitstream: " + std::to_string(indices.size()) + " indices for " +
                        std::to_string(header.frame_count) + " frames x " +
                        std::to_string(header.num_speech_codebooks) + " codebooks");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kBitstreamHeaderBytes + payload_bytes(header));
  out.insert(out.end(), std::begin(kBitstreamMagic), std::end(kBitstreamMagic));
  out.push_back(kBitstreamVersion);
  put_le(out, header.sample_rate, 4);
  put_le(out, header.latent_rate, 2);
  out.push_back(header.num_speech_codebooks);
  out.push_back(header.bits_per_code);
  put_le(out, header.speaker_index, 2);
  put_le(out, header.frame_count, 4);

  const std::size_t base = out.size();
  out.resize(base + payload_bytes(header), 0);
  std::size_t bit = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int v = indices[i];
    if (v < 0 || v > kMaxCodeIndex) {
      throw BitstreamError(Code::IndexOverflow,
                           "bitstream: index " + std::to_string(v) + " at position " + std::to_string(i) +
                               " does not fit in 9 bits");
    }
    for (int b = kBitsPerCode - 1; b >= 0; --b, ++bit) {
      if ((v >> b) & 1) out[base + bit / 8] |= static_cast<std::uint8_t>(0x80u >> (bit % 8));
    }
  }
  return out;
}

UnpackedStream unpack(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4, std::begin(kBitstreamMagic))) {
    throw BitstreamError(Code::BadMagic, "bitstream: bad magic");
  }
  if (bytes.size() < 5) throw BitstreamError(Code::Truncated, "bitstream: truncated header");
  if (bytes[4] != kBitstreamVersion) {
    throw BitstreamError(Code::UnsupportedVersion,
                         "bitstream: unsupported version " + std::to_string(bytes[4]));
  }
  if (bytes.size() < kBitstreamHeaderBytes) throw BitstreamError(Code::Truncated, "bitstream: truncated header");

  UnpackedStream s;
  auto& h = s.header;
  h.sample_rate = static_cast<std::uint32_t>(get_le(bytes, 5, 4));
  h.latent_rate = static_cast<std::uint16_t>(get_le(bytes, 9, 2));
  h.num_speech_codebooks = bytes[11];
  h.bits_per_code = bytes[12];
  h.speaker_index = static_cast<std::uint16_t>(get_le(bytes, 13, 2));
  h.frame_count = static_cast<std::uint32_t>(get_le(bytes, 15, 4));
  validate_header(h);

  const std::size_t need = payload_bytes(h);
  const std::size_t have = bytes.size() - kBitstreamHeaderBytes;
  if (have < need) {
    throw BitstreamError(Code::Truncated, "bitstream: payload has " + std::to_string(have) + " bytes, header needs " +
                                              std::to_string(need));
  }
  if (have > need) {
    throw BitstreamError(Code::TrailingData,
                         "bitstream: " + std::to_string(have - need) + " unexpected bytes after payload");
  }
  const auto payload = bytes.subspan(kBitstreamHeaderBytes);
  s.indices.resize(static_cast<std::size_t>(h.frame_count) * h.num_speech_codebooks);
  std::size_t bit = 0;
  for (int& v : s.indices) {
    v = 0;
    for (int b = 0; b < kBitsPerCode; ++b, ++bit) v = (v << 1) | ((payload[bit / 8] >> (7 - bit % 8)) & 1);
  }
  return s;
}

double bitrate(const QuantizerConfig& cfg, double latent_rate) {
  return static_cast<double>(cfg.num_speech_codebooks) * kBitsPerCode * latent_rate;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_input("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw invalid_input("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw invalid_input("write failed for " + path);
}

}  // namespace vqwave
