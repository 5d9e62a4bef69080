#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vqwave/dsp/waveform.hpp"

namespace vqwave::dsp {

/// Reads a RIFF/WAVE PCM16 mono file. Samples are int16 / 32768.
Waveform wav_read(const std::filesystem::path& path);
Waveform wav_parse(std::span<const std::uint8_t> bytes);

/// Writes a canonical 44-byte-header PCM16 mono file.
void wav_write(const std::filesystem::path& path, const Waveform& w);
std::vector<std::uint8_t> wav_serialize(const Waveform& w);

/// Float to int16 with round-to-nearest and saturation.
std::int16_t to_pcm16(double x);

}  // namespace vqwave::dsp
