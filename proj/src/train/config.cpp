#include "vqwave/train/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "vqwave/error.hpp"

namespace vqwave::train {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

// Shortest text that parses back to exactly `v`.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw usage_error("config key " + key + ": expected a number, got '" + v + "'");
  return d;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long d = 0;
  try {
    d = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw usage_error("config key " + key + ": expected an integer, got '" + v + "'");
  return d;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw usage_error("config key " + key + ": expected true or false, got '" + v + "'");
}

std::vector<int> to_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(static_cast<int>(to_int(key, trim(item))));
  if (out.empty()) throw usage_error("config key " + key + ": expected a comma-separated list");
  return out;
}

std::string from_list(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct KeyDef {
  ConfigKey doc;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

#define VQ_DOUBLE(KEY, FIELD, HELP)                                                   \
  KeyDef {                                                                            \
    {KEY, "", HELP}, [](const TrainConfig& c) { return fmt(c.FIELD); },               \
        [](TrainConfig& c, const std::string& v) { c.FIELD = to_double(KEY, v); }     \
  }
#define VQ_INT(KEY, FIELD, HELP)                                                                                  \
  KeyDef {                                                                                                        \
    {KEY, "", HELP}, [](const TrainConfig& c) { return std::to_string(c.FIELD); },                                \
        [](TrainConfig& c, const std::string& v) { c.FIELD = static_cast<decltype(c.FIELD)>(to_int(KEY, v)); }   \
  }
#define VQ_BOOL(KEY, FIELD, HELP)                                                             \
  KeyDef {                                                                                    \
    {KEY, "", HELP}, [](const TrainConfig& c) { return std::string(c.FIELD ? "true" : "false"); }, \
        [](TrainConfig& c, const std::string& v) { c.FIELD = to_bool(KEY, v); }               \
  }
#define VQ_LIST(KEY, FIELD, HELP)                                                  \
  KeyDef {                                                                         \
    {KEY, "", HELP}, [](const TrainConfig& c) { return from_list(c.FIELD); },      \
        [](TrainConfig& c, const std::string& v) { c.FIELD = to_list(KEY, v); }    \
  }

const std::vector<KeyDef>& key_defs() {
  static const std::vector<KeyDef> defs = [] {
    std::vector<KeyDef> d{
        KeyDef{{"preset", "", "model size preset: full or tiny (applied before other keys)"},
               [](const TrainConfig& c) { return c.preset; },
               [](TrainConfig& c, const std::string& v) { apply_preset(c, v); }},
        VQ_DOUBLE("mel.hop_seconds", model.mel.hop_seconds, "log-mel hop length in seconds"),
        VQ_DOUBLE("mel.window_seconds", model.mel.window_seconds, "log-mel analysis window in seconds (0.25 also accepted)"),
        KeyDef{{"mel.bins", "", "number of mel bands"},
               [](const TrainConfig& c) { return std::to_string(c.model.mel.mel_bins); },
               [](TrainConfig& c, const std::string& v) {
                 c.model.mel.mel_bins = static_cast<int>(to_int("mel.bins", v));
                 c.model.encoder.mel_bins = c.model.mel.mel_bins;
               }},
        VQ_INT("encoder.filters", model.encoder.filters, "speech encoder filters per layer"),
        VQ_LIST("encoder.strides", model.encoder.strides, "speech encoder strides per layer"),
        VQ_LIST("encoder.kernels", model.encoder.kernels, "speech encoder kernel sizes per layer"),
        VQ_INT("encoder.speaker_filters", model.encoder.speaker_filters, "speaker encoder filters per layer"),
        VQ_LIST("encoder.speaker_strides", model.encoder.speaker_strides, "speaker encoder strides per layer"),
        VQ_LIST("encoder.speaker_kernels", model.encoder.speaker_kernels, "speaker encoder kernel sizes per layer"),
        VQ_INT("quantizer.num_speech_codebooks", model.quantizer.num_speech_codebooks,
               "speech codebooks (2 gives 0.9 kb/s, 3 gives 1.35 kb/s)"),
        VQ_INT("quantizer.bits", model.quantizer.bits, "bits per codebook (codebook size 2^bits, at most 9)"),
        VQ_INT("quantizer.code_dim", model.quantizer.code_dim, "projection output size before quantizing"),
        VQ_DOUBLE("quantizer.commitment", model.quantizer.commitment, "commitment weight lambda"),
        VQ_DOUBLE("quantizer.ema_decay", model.quantizer.ema_decay, "EMA k-means decay gamma"),
        VQ_DOUBLE("quantizer.ema_epsilon", model.quantizer.ema_epsilon, "floor on EMA counts"),
        VQ_INT("decoder.frame_gru_hidden", model.decoder.frame_gru_hidden, "frame-rate GRU hidden size"),
        VQ_INT("decoder.sample_gru_hidden", model.decoder.sample_gru_hidden, "sample-rate GRU hidden size"),
        VQ_INT("decoder.dense_hidden", model.decoder.dense_hidden, "hidden size of the output dense layer"),
        VQ_BOOL("decoder.prev_sample_embedding", model.decoder.prev_sample_embedding,
                "feed the previous sample as a 256-entry table instead of a scalar"),
        VQ_INT("train.batch_size", batch_size, "clips per step"),
        VQ_DOUBLE("train.sample_seconds", sample_seconds, "clip length in seconds"),
        KeyDef{{"train.mode", "", "enhancing, codec_only or enhancing_low_noise"},
               [](const TrainConfig& c) { return to_string(c.mode); },
               [](TrainConfig& c, const std::string& v) { c.mode = parse_train_mode(v); }},
        VQ_INT("train.steps", steps, "optimizer steps"),
        VQ_INT("train.seed", seed, "seed for initialisation and data sampling"),
        VQ_DOUBLE("train.learning_rate", adam.lr, "Adam learning rate"),
        VQ_DOUBLE("train.adam_beta1", adam.beta1, "Adam beta1"),
        VQ_DOUBLE("train.adam_beta2", adam.beta2, "Adam beta2"),
        VQ_DOUBLE("train.adam_eps", adam.eps, "Adam epsilon"),
        VQ_DOUBLE("train.grad_clip", adam.grad_clip, "global gradient-norm clip, 0 disables"),
        KeyDef{{"train.lr_schedule", "", "constant or cosine"},
               [](const TrainConfig& c) { return c.lr_schedule; },
               [](TrainConfig& c, const std::string& v) {
                 if (v != "constant" && v != "cosine") throw usage_error("train.lr_schedule must be constant or cosine");
                 c.lr_schedule = v;
               }},
        VQ_DOUBLE("train.lr_min", lr_min, "final learning rate of the cosine schedule"),
        VQ_INT("train.checkpoint_every", checkpoint_every, "steps between checkpoints, 0 disables"),
        VQ_INT("train.log_every", log_every, "steps between log lines"),
        VQ_DOUBLE("data.nonstationary_weight", nonstationary_weight, "sampling weight factor for non-stationary noise"),
        VQ_DOUBLE("data.reverb_probability", sampler.reverb_probability, "probability of convolving speech with a room response"),
        VQ_BOOL("data.convolve_noise", sampler.convolve_noise, "apply the room response to the noise as well"),
        VQ_DOUBLE("data.room_min", sampler.room_min, "smallest room side in metres"),
        VQ_DOUBLE("data.room_max", sampler.room_max, "largest room side in metres"),
        VQ_DOUBLE("data.beta_min", sampler.beta_min, "smallest wall reflection coefficient"),
        VQ_DOUBLE("data.beta_max", sampler.beta_max, "largest wall reflection coefficient"),
        VQ_INT("data.max_order", sampler.max_order, "image-source reflection order"),
    };
    const TrainConfig defaults;
    for (auto& k : d) k.doc.default_value = k.get(defaults);
    return d;
  }();
  return defs;
}

#undef VQ_DOUBLE
#undef VQ_INT
#undef VQ_BOOL
#undef VQ_LIST

const KeyDef& find_key(const std::string& key) {
  for (const auto& k : key_defs()) {
    if (k.doc.name == key) return k;
  }
  throw usage_error("unknown config key '" + key + "'");
}

}  // namespace

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::Enhancing: return "enhancing";
    case TrainMode::CodecOnly: return "codec_only";
    case TrainMode::EnhancingLowNoise: return "enhancing_low_noise";
  }
  return "enhancing";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "enhancing") return TrainMode::Enhancing;
  if (s == "codec_only") return TrainMode::CodecOnly;
  if (s == "enhancing_low_noise") return TrainMode::EnhancingLowNoise;
  throw usage_error("unknown training mode '" + s + "' (enhancing, codec_only, enhancing_low_noise)");
}

data::NoiseMode noise_mode(TrainMode m) {
  switch (m) {
    case TrainMode::Enhancing: return data::NoiseMode::Standard;
    case TrainMode::CodecOnly: return data::NoiseMode::Clean;
    case TrainMode::EnhancingLowNoise: return data::NoiseMode::LowNoise;
  }
  return data::NoiseMode::Standard;
}

double TrainConfig::learning_rate_at(std::int64_t t) const {
  if (lr_schedule == "constant" || steps <= 1) return adam.lr;
  const double progress = std::clamp(static_cast<double>(t - 1) / static_cast<double>(steps - 1), 0.0, 1.0);
  return lr_min + 0.5 * (adam.lr - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

void TrainConfig::validate() const {
  model.validate();
  if (batch_size < 1) throw usage_error("train.batch_size must be positive");
  const double samples = sample_seconds * model.mel.sample_rate;
  if (!(sample_seconds > 0.0) || std::abs(samples - std::round(samples)) > 1e-9) {
    throw usage_error("train.sample_seconds * 16000 must be a positive integer");
  }
  if (steps < 0) throw usage_error("train.steps must be non-negative");
  if (adam.lr < 0.0) throw usage_error("train.learning_rate must be non-negative");
  if (!(nonstationary_weight > 0.0)) throw usage_error("data.nonstationary_weight must be positive");
  if (sampler.max_order < 0 || sampler.max_order > data::kMaxReflectionOrder) {
    throw usage_error("data.max_order must be in [0, 20]");
  }
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& k : key_defs()) out += k.doc.name + " = " + k.get(*this) + "\n";
  return out;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& k : key_defs()) out.push_back(k.doc);
    return out;
  }();
  return keys;
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  find_key(key).set(cfg, trim(value));
}

std::string get_config_value(const TrainConfig& cfg, const std::string& key) { return find_key(key).get(cfg); }

void apply_preset(TrainConfig& cfg, const std::string& preset) {
  if (preset == "full") {
    cfg.model = ModelConfig::full(3);
  } else if (preset == "tiny") {
    cfg.model = ModelConfig::tiny();
  } else {
    throw usage_error("unknown preset '" + preset + "' (full or tiny)");
  }
  cfg.preset = preset;
}

TrainConfig tiny_config() {
  TrainConfig c;
  apply_preset(c, "tiny");
  return c;
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::vector<std::pair<std::string, std::string>> items;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw usage_error("config line " + std::to_string(lineno) + ": expected key = value");
    items.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  for (const auto& [k, v] : items) {
    if (k == "preset") set_config_value(base, k, v);
  }
  for (const auto& [k, v] : items) {
    if (k != "preset") set_config_value(base, k, v);
  }
  return base;
}

TrainConfig load_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw usage_error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

}  // namespace vqwave::train
