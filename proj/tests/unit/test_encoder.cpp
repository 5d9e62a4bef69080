#include <cmath>
#include <algorithm>
#include <random>

#include "doctest.h"
#include "vqwave/encoder.hpp"
#include "vqwave/error.hpp"

using namespace vqwave;

namespace {

dsp::LogMelSpectrogram random_mel(int frames, std::mt19937_64& rng, int bins = 80) {
  dsp::LogMelSpectrogram m;
  m.frames = frames;
  m.bins = bins;
  m.values.resize(static_cast<std::size_t>(frames) * bins);
  std::normal_distribution<double> nd(-4.0, 2.0);
  for (auto& v : m.values) v = nd(rng);
  return m;
}

// Latent frames for a clip of `samples` at 16 kHz: floor(N / 160) analysis
// frames, halved with rounding up by the single stride-2 layer.
int analytic_latent_frames(std::size_t samples) {
  const int mel_frames = static_cast<int>(samples / 160);
  return (mel_frames + 1) / 2;
}

}  // namespace

TEST_CASE("100 mel frames give 50 latent frames; full-size shapes are finite") {
  std::mt19937_64 rng(1);
  const EncoderConfig cfg;
  Encoder enc(cfg, rng);
  const auto mel = random_mel(100, rng);
  const Encoding e = encode_speech(enc, mel);
  CHECK(e.frames.rows() == 50);
  CHECK(e.frames.cols() == 768);
  for (double v : e.frames.values()) CHECK(std::isfinite(v));
  const SpeakerEmbedding s = encode_speaker(enc, mel);
  CHECK(s.vector.size() == 64);
  for (double v : s.vector) CHECK(std::isfinite(v));
  CHECK(latent_frame_count(100, cfg) == 50);
  CHECK(cfg.downsample() == 2);
}

TEST_CASE("latent-rate law over random durations") {
  std::mt19937_64 rng(2);
  EncoderConfig cfg;
  cfg.filters = 8;
  cfg.speaker_filters = 8;
  Encoder enc(cfg, rng);
  std::uniform_int_distribution<std::size_t> dur(3200, 80000);
  for (int i = 0; i < 40; ++i) {
    const std::size_t n = dur(rng);
    const int mel_frames = dsp::mel_frame_count(n, dsp::MelConfig{});
    const auto out = encode_speech(enc, random_mel(mel_frames, rng));
    CHECK_MESSAGE(out.frames.rows() == analytic_latent_frames(n), "samples " << n);
  }
}

TEST_CASE("too-short input is rejected") {
  std::mt19937_64 rng(3);
  EncoderConfig cfg;
  cfg.filters = 8;
  Encoder enc(cfg, rng);
  CHECK_THROWS_AS(encode_speech(enc, random_mel(1, rng)), Error);
  CHECK_NOTHROW(encode_speech(enc, random_mel(2, rng)));
}

TEST_CASE("speaker embedding of a time-constant input equals a single frame's output") {
  std::mt19937_64 rng(4);
  EncoderConfig cfg;
  cfg.filters = 8;
  Encoder enc(cfg, rng);
  // With wider kernels and 'same' padding the edge frames see zeros, so a
  // kernel-1 speaker stack is used to make every output frame identical.
  cfg.speaker_kernels = {1, 1, 1, 1};
  Encoder flat(cfg, rng);
  auto one = random_mel(1, rng);
  dsp::LogMelSpectrogram many = one;
  many.frames = 9;
  many.values.clear();
  for (int t = 0; t < 9; ++t) many.values.insert(many.values.end(), one.values.begin(), one.values.end());
  nn::Tape tape;
  const auto single = flat.forward_speaker(tape, tape.constant(stack_mel({one})), 1, nn::Mode::Eval);
  const auto s = encode_speaker(flat, many);
  for (std::size_t c = 0; c < s.vector.size(); ++c) CHECK(s.vector[c] == doctest::Approx(single.value()[c]).epsilon(1e-12));
}

TEST_CASE("speaker embedding is unchanged by repeating the input, up to edge frames") {
  std::mt19937_64 rng(5);
  EncoderConfig cfg;
  cfg.filters = 8;
  // Narrow stacks keep the long input cheap; the property does not depend on width.
  cfg.mel_bins = 8;
  cfg.speaker_filters = 8;
  Encoder enc(cfg, rng);
  // Only the frames next to the ends and the junction differ, so the relative
  // change shrinks as 1/T and falls below 1e-5 on a long input.
  auto relative_change = [&](int frames) {
    const auto x = random_mel(frames, rng, cfg.mel_bins);
    dsp::LogMelSpectrogram xx = x;
    xx.frames *= 2;
    xx.values.insert(xx.values.end(), x.values.begin(), x.values.end());
    const auto a = encode_speaker(enc, x);
    const auto b = encode_speaker(enc, xx);
    double diff = 0, norm = 0;
    for (std::size_t c = 0; c < a.vector.size(); ++c) {
      diff += std::pow(a.vector[c] - b.vector[c], 2);
      norm += a.vector[c] * a.vector[c];
    }
    return std::sqrt(diff / norm);
  };
  const double small = relative_change(2000);
  const double large = relative_change(200000);
  CHECK(large <= 1e-5);
  CHECK(large < small / 20);
}

TEST_CASE("eval encoding is deterministic and batch elements do not interact") {
  std::mt19937_64 rng(6);
  EncoderConfig cfg;
  cfg.filters = 8;
  Encoder enc(cfg, rng);
  const auto a = random_mel(20, rng);
  const auto b = random_mel(20, rng);
  nn::Tape t1, t2;
  const auto ab = enc.forward(t1, stack_mel({a, b}), 2, nn::Mode::Eval);
  const auto ba = enc.forward(t2, stack_mel({b, a}), 2, nn::Mode::Eval);
  const auto rows = ab.frames;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < 8; ++c) {
      CHECK(ab.speech.value().at(r, c) == ba.speech.value().at(rows + r, c));
      CHECK(ab.speech.value().at(rows + r, c) == ba.speech.value().at(r, c));
    }
  }
  const auto again = encode_speech(enc, a);
  const auto once = encode_speech(enc, a);
  CHECK(std::ranges::equal(again.frames.values(), once.frames.values()));
}
