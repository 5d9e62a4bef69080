#include "vqwave/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <random>
#include <sstream>

#include "vqwave/bitstream.hpp"
#include "vqwave/codec_model.hpp"
#include "vqwave/data/manifest.hpp"
#include "vqwave/data/mixing.hpp"
#include "vqwave/data/room.hpp"
#include "vqwave/dsp/wav.hpp"
#include "vqwave/error.hpp"
#include "vqwave/train/config.hpp"
#include "vqwave/train/evaluate.hpp"
#include "vqwave/train/trainer.hpp"

namespace vqwave {

namespace {

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage: return kExitUsage;
    case ErrorKind::InvalidInput: return kExitIncompatible;
    case ErrorKind::Incompatible: return kExitIncompatible;
    case ErrorKind::Numerical: return kExitNumerical;
  }
  return kExitUsage;
}

data::Vec3 parse_vec3(const std::string& s, const char* what) {
  data::Vec3 v{};
  std::istringstream in(s);
  std::string item;
  int i = 0;
  while (std::getline(in, item, ',')) {
    if (i == 3) throw usage_error(std::string(what) + ": expected three comma-separated numbers");
    try {
      std::size_t used = 0;
      v[i] = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw usage_error(std::string(what) + ": not a number: '" + item + "'");
    }
    ++i;
  }
  if (i != 3) throw usage_error(std::string(what) + ": expected three comma-separated numbers");
  return v;
}

std::vector<double> read_response(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw invalid_input("cannot open response file " + path);
  std::vector<double> h;
  double v = 0;
  while (in >> v) h.push_back(v);
  if (!in.eof()) throw invalid_input("response file " + path + ": expected one number per line");
  if (h.empty()) throw invalid_input("response file " + path + " is empty");
  return h;
}

void write_response(const std::string& path, const std::vector<double>& h) {
  std::ofstream out(path);
  if (!out) throw invalid_input("cannot write " + path);
  out << std::setprecision(17);
  for (double v : h) out << v << "\n";
}

struct TrainArgs {
  std::string config_path, manifest, out, resume, preset, mode;
  std::vector<std::string> sets;
  std::int64_t steps = -1;
  std::int64_t seed = -1;
};

train::TrainConfig build_train_config(const TrainArgs& a) {
  train::TrainConfig cfg;
  if (!a.preset.empty()) train::apply_preset(cfg, a.preset);
  if (!a.config_path.empty()) cfg = train::load_config(a.config_path, cfg);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw usage_error("--set expects key=value, got '" + kv + "'");
    train::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!a.mode.empty()) cfg.mode = train::parse_train_mode(a.mode);
  if (a.steps >= 0) cfg.steps = a.steps;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  train::TrainConfig cfg = a.resume.empty() ? build_train_config(a) : train::checkpoint_config(a.resume);
  if (!a.resume.empty() && a.steps >= 0) cfg.steps = a.steps;
  const bool need_noise = cfg.mode != train::TrainMode::CodecOnly;
  auto manifest = data::DatasetManifest::load(a.manifest);
  manifest.validate(true, need_noise);
  data::Corpus corpus(std::move(manifest), cfg.nonstationary_weight);

  train::Trainer trainer(cfg, train::corpus_source(corpus, cfg));
  if (!a.resume.empty()) trainer.load(a.resume);
  out << "training " << cfg.preset << " model, mode " << train::to_string(cfg.mode) << ", "
      << trainer.model().parameters().size() << " parameter tensors, steps " << trainer.steps_done() << " -> "
      << cfg.steps << "\n";
  trainer.run([&](std::int64_t step, const train::LossReport& r) {
    if (cfg.log_every > 0 && (step % cfg.log_every == 0 || step == cfg.steps)) {
      out << "step " << step << " total " << r.total << " ce " << r.ce << " commitment " << r.vq_commitment
          << " codebook_error " << r.codebook_error << " perplexity";
      for (double p : r.perplexity) out << " " << p;
      out << "\n" << std::flush;
    }
    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) trainer.save(a.out);
  });
  trainer.save(a.out);
  out << "saved " << a.out << "\n";
  return kExitOk;
}

int cmd_encode(const std::string& model_path, const std::string& in, const std::string& out_path, std::ostream& out) {
  const dsp::Waveform w = dsp::wav_read(in);
  w.require_codec_rate();
  auto model = train::load_model(model_path);
  const auto bytes = model->encode_to_bytes(w);
  write_file_bytes(out_path, bytes);
  const UnpackedStream s = unpack(bytes);
  const double payload_bits = static_cast<double>(payload_bytes(s.header)) * 8.0;
  const double seconds = w.duration_seconds();
  out << "frames " << s.header.frame_count << " payload_bits " << payload_bits << " bytes " << bytes.size() << "\n";
  out << std::fixed << std::setprecision(3) << "bitrate " << payload_bits / seconds / 1000.0 << " kb/s (nominal "
      << bitrate(model->config().quantizer, model->config().latent_rate()) / 1000.0 << " kb/s)\n";
  return kExitOk;
}

int cmd_decode(const std::string& model_path, const std::string& in, const std::string& out_path, std::uint64_t seed,
               double temperature, std::ostream& out) {
  const auto bytes = read_file_bytes(in);
  auto model = train::load_model(model_path);
  const dsp::Waveform w = model->decode_bytes(bytes, seed, temperature);
  dsp::wav_write(out_path, w);
  out << "samples " << w.size() << "\n";
  return kExitOk;
}

int cmd_mix(const std::string& speech, const std::string& noise, const std::string& rir, double snr, std::uint64_t seed,
            bool convolve_noise, const std::string& out_path, const std::string& target_path, std::ostream& out) {
  const dsp::Waveform s = dsp::wav_read(speech);
  const dsp::Waveform n = dsp::wav_read(noise);
  s.require_codec_rate();
  n.require_codec_rate();
  if (n.size() < s.size()) throw invalid_input("noise is shorter than speech");
  std::mt19937_64 rng(seed);
  const auto offset = std::uniform_int_distribution<std::size_t>(0, n.size() - s.size())(rng);
  std::vector<double> crop(n.vector().begin() + static_cast<std::ptrdiff_t>(offset),
                           n.vector().begin() + static_cast<std::ptrdiff_t>(offset + s.size()));
  data::MixtureSpec spec{s, dsp::Waveform(std::move(crop), n.sample_rate()), std::nullopt, snr, convolve_noise};
  if (!rir.empty()) spec.rir = read_response(rir);
  const data::Mixture m = data::mix_at_snr(spec);
  dsp::wav_write(out_path, m.x);
  if (!target_path.empty()) dsp::wav_write(target_path, m.target);
  out << std::setprecision(6) << "alpha " << m.alpha << " gain " << m.gain << " achieved_snr_db " << m.achieved_snr_db
      << "\n";
  return kExitOk;
}

int cmd_rir(const data::RoomSpec& room, int sample_rate, bool normalize, const std::string& out_path, std::ostream& out) {
  const auto h = normalize ? data::normalized_rir(room, sample_rate) : data::image_source_rir(room, sample_rate);
  write_response(out_path, h);
  std::size_t taps = 0;
  for (double v : h) taps += v != 0.0;
  out << "length " << h.size() << " nonzero_taps " << taps << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& manifest_path, const train::EvalOptions& opts,
             std::ostream& out, std::ostream& err) {
  auto manifest = data::DatasetManifest::load(manifest_path);
  if (manifest.eval.empty()) throw invalid_input("manifest has no evaluation entries (ref=<path>,snr=<dB>)");
  manifest.validate(false, false);
  auto model = train::load_model(model_path);
  const auto report = train::evaluate_objective(*model, train::load_eval_items(manifest), opts);
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";
  out << report.table();
  return kExitOk;
}

}  // namespace

std::string config_help() {
  std::ostringstream o;
  o << "Configuration keys (train --config FILE or --set key=value), default in brackets:\n";
  for (const auto& k : train::config_keys()) {
    o << "  " << std::left << std::setw(34) << k.name << " [" << k.default_value << "]  " << k.help << "\n";
  }
  return o.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"vqwave: VQ-VAE speech compressor-enhancer"};
  app.require_subcommand(1);
  app.footer(config_help());

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a model from a manifest");
  train_cmd->add_option("--manifest", ta.manifest, "training manifest")->required();
  train_cmd->add_option("--out", ta.out, "checkpoint path")->required();
  train_cmd->add_option("--config", ta.config_path, "key = value configuration file");
  train_cmd->add_option("--preset", ta.preset, "full or tiny");
  train_cmd->add_option("--mode", ta.mode, "enhancing, codec_only or enhancing_low_noise");
  train_cmd->add_option("--steps", ta.steps, "number of optimizer steps");
  train_cmd->add_option("--seed", ta.seed, "seed");
  train_cmd->add_option("--set", ta.sets, "override a configuration key (key=value), repeatable");
  train_cmd->add_option("--resume", ta.resume, "continue from a checkpoint");

  std::string model_path, in_path, out_path;
  std::int64_t seed = 0;
  double temperature = 1.0;
  auto* encode_cmd = app.add_subcommand("encode", "compress a 16 kHz mono PCM16 wav");
  encode_cmd->add_option("--model", model_path, "checkpoint")->required();
  encode_cmd->add_option("--in", in_path, "input wav")->required();
  encode_cmd->add_option("--out", out_path, "output bitstream")->required();
  encode_cmd->add_option("--seed", seed, "seed (encoding is deterministic)");

  auto* decode_cmd = app.add_subcommand("decode", "decompress a bitstream to a wav");
  decode_cmd->add_option("--model", model_path, "checkpoint")->required();
  decode_cmd->add_option("--in", in_path, "input bitstream")->required();
  decode_cmd->add_option("--out", out_path, "output wav")->required();
  decode_cmd->add_option("--seed", seed, "sampling seed");
  decode_cmd->add_option("--temperature", temperature, "sampling temperature, 0 for argmax")
      ->check(CLI::NonNegativeNumber);

  std::string speech, noise, rir, target_out;
  double snr = 0.0;
  bool convolve_noise = false;
  auto* mix_cmd = app.add_subcommand("mix", "mix speech and noise at a given SNR");
  mix_cmd->add_option("--speech", speech, "clean speech wav")->required();
  mix_cmd->add_option("--noise", noise, "noise wav, at least as long as the speech")->required();
  mix_cmd->add_option("--snr", snr, "SNR in dB")->required();
  mix_cmd->add_option("--rir", rir, "response file (one tap per line) applied to the speech");
  mix_cmd->add_flag("--convolve-noise", convolve_noise, "apply the response to the noise as well");
  mix_cmd->add_option("--seed", seed, "seed for the noise crop offset");
  mix_cmd->add_option("--out", out_path, "mixture wav")->required();
  mix_cmd->add_option("--target-out", target_out, "write the (possibly rescaled) clean target");

  std::string dims, source, mic;
  data::RoomSpec room;
  int sample_rate = dsp::kCodecSampleRate;
  bool normalize = false;
  auto* rir_cmd = app.add_subcommand("rir", "image-source room impulse response");
  rir_cmd->add_option("--room", dims, "room size Lx,Ly,Lz in metres")->required();
  rir_cmd->add_option("--source", source, "source position x,y,z")->required();
  rir_cmd->add_option("--mic", mic, "microphone position x,y,z")->required();
  rir_cmd->add_option("--beta", room.reflection_coefficient, "wall reflection coefficient in [0, 1)");
  rir_cmd->add_option("--order", room.max_order, "maximum reflection order");
  rir_cmd->add_option("--speed-of-sound", room.speed_of_sound, "m/s");
  rir_cmd->add_option("--rate", sample_rate, "sample rate in Hz");
  rir_cmd->add_flag("--normalize", normalize, "direct path at sample 0 with unit amplitude");
  rir_cmd->add_option("--seed", seed, "seed (the response is deterministic)");
  rir_cmd->add_option("--out", out_path, "response file, one tap per line")->required();

  std::string manifest;
  bool passthrough = false;
  auto* eval_cmd = app.add_subcommand("eval", "objective metrics per SNR bucket");
  eval_cmd->add_option("--model", model_path, "checkpoint")->required();
  eval_cmd->add_option("--manifest", manifest, "manifest with ref=<path>,snr=<dB> entries")->required();
  eval_cmd->add_option("--seed", seed, "sampling seed");
  eval_cmd->add_option("--temperature", temperature, "sampling temperature, 0 for argmax")
      ->check(CLI::NonNegativeNumber);
  eval_cmd->add_flag("--passthrough", passthrough, "score the noisy input itself instead of the decoded output");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (seed < 0) throw usage_error("--seed must be non-negative");
    const auto useed = static_cast<std::uint64_t>(seed);
    if (*train_cmd) return cmd_train(ta, out);
    if (*encode_cmd) return cmd_encode(model_path, in_path, out_path, out);
    if (*decode_cmd) return cmd_decode(model_path, in_path, out_path, useed, temperature, out);
    if (*mix_cmd) return cmd_mix(speech, noise, rir, snr, useed, convolve_noise, out_path, target_out, out);
    if (*rir_cmd) {
      room.dimensions = parse_vec3(dims, "--room");
      room.source = parse_vec3(source, "--source");
      room.mic = parse_vec3(mic, "--mic");
      return cmd_rir(room, sample_rate, normalize, out_path, out);
    }
    if (*eval_cmd) {
      train::EvalOptions opts;
      opts.seed = useed;
      opts.temperature = temperature;
      opts.estimator = passthrough ? train::Estimator::Passthrough : train::Estimator::Model;
      return cmd_eval(model_path, manifest, opts, out, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIncompatible;
  }
  return kExitUsage;
}

}  // namespace vqwave
