#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vqwave/dsp/waveform.hpp"

namespace vqwave::data {

// Manifest format: one entry per line, `path<TAB>weight<TAB>flags`.
// Blank lines and lines starting with '#' are ignored. Flags are
// comma-separated tokens:
//   speech            clean training speech
//   noise             training noise
//   nonstationary     noise flagged as non-stationary (drawn more often)
//   ref=<path>        the entry is a noisy evaluation clip paired with a clean reference
//   snr=<dB>          SNR label of an evaluation clip
// Relative paths are resolved against the manifest's directory.

struct ManifestEntry {
  std::filesystem::path path;
  double weight = 1.0;
  bool nonstationary = false;
};

struct EvalPair {
  std::filesystem::path noisy;
  std::filesystem::path reference;
  double snr_db = 0.0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> speech;
  std::vector<ManifestEntry> noise;
  std::vector<EvalPair> eval;

  static DatasetManifest parse(const std::string& text, const std::filesystem::path& base_dir = {});
  static DatasetManifest load(const std::filesystem::path& path);

  /// Checks that training lists are nonempty (when `training`) and that every
  /// referenced file exists and is a 16 kHz mono PCM16 wav.
  void validate(bool training, bool need_noise = true) const;
};

/// Audio sources for example sampling. Files are read lazily and cached;
/// `on_read` is invoked with every path actually read from disk.
class Corpus {
 public:
  Corpus() = default;
  Corpus(DatasetManifest manifest, double nonstationary_weight = 2.0);
  static Corpus from_memory(std::vector<dsp::Waveform> speech, std::vector<dsp::Waveform> noise,
                            std::vector<bool> nonstationary = {}, double nonstationary_weight = 2.0);

  std::size_t speech_count() const { return speech_weights_.size(); }
  std::size_t noise_count() const { return noise_weights_.size(); }
  const std::vector<double>& speech_weights() const { return speech_weights_; }
  /// Noise weights with the non-stationary factor applied.
  const std::vector<double>& noise_weights() const { return noise_weights_; }

  const dsp::Waveform& speech(std::size_t i);
  const dsp::Waveform& noise(std::size_t i);

  std::function<void(const std::filesystem::path&)> on_read;

 private:
  const dsp::Waveform& fetch(std::map<std::size_t, dsp::Waveform>& cache, const std::vector<ManifestEntry>& entries,
                             std::size_t i);

  DatasetManifest manifest_;
  std::vector<double> speech_weights_, noise_weights_;
  std::map<std::size_t, dsp::Waveform> speech_cache_, noise_cache_;
};

}  // namespace vqwave::data
