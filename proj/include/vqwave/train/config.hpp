#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vqwave/data/sampler.hpp"
#include "vqwave/model_config.hpp"
#include "vqwave/nn/adam.hpp"

namespace vqwave::train {

enum class TrainMode {
  Enhancing,          // noisy input, SNR in [-5, 25] dB, clean target
  CodecOnly,          // clean input and target; noise files are never read
  EnhancingLowNoise,  // noisy input, SNR in [5, 25] dB
};

std::string to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& s);
data::NoiseMode noise_mode(TrainMode m);

struct TrainConfig {
  std::string preset = "full";
  ModelConfig model = ModelConfig::full(3);
  int batch_size = 80;
  double sample_seconds = 1.0;
  nn::AdamConfig adam;
  std::string lr_schedule = "constant";  // constant | cosine
  double lr_min = 0.0;                   // final rate of the cosine schedule
  TrainMode mode = TrainMode::Enhancing;
  std::int64_t steps = 1000000;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 1000;
  std::int64_t log_every = 10;
  double nonstationary_weight = 2.0;
  data::SamplerConfig sampler;

  /// Learning rate at optimizer step `t` (1-based).
  double learning_rate_at(std::int64_t t) const;

  /// Throws Usage for inconsistent settings.
  void validate() const;

  /// Every key as `key = value` lines, parseable by parse_config.
  std::string to_text() const;
};

struct ConfigKey {
  std::string name;
  std::string default_value;  // value in the default (full preset) configuration
  std::string help;
};

/// Documented keys in file order.
const std::vector<ConfigKey>& config_keys();

/// Assigns one key; throws Usage for unknown keys or malformed values.
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const TrainConfig& cfg, const std::string& key);

/// Parses `key = value` lines ('#' comments allowed). A `preset` line is
/// applied first so that later keys override the preset's sizes.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::string& path, TrainConfig base = {});

/// Configuration with the tiny model preset applied.
TrainConfig tiny_config();

/// Applies `preset` ("full" or "tiny") to the model sizes.
void apply_preset(TrainConfig& cfg, const std::string& preset);

}  // namespace vqwave::train
