#include "vqwave/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vqwave/dsp/mulaw.hpp"
#include "vqwave/error.hpp"

namespace vqwave {

dsp::MuLawCode shift_for_teacher_forcing(std::span<const std::uint8_t> codes, int batch) {
  if (batch < 1 || codes.size() % static_cast<std::size_t>(batch) != 0) {
    throw invalid_input("teacher forcing: code count not divisible by batch");
  }
  const std::size_t len = codes.size() / static_cast<std::size_t>(batch);
  dsp::MuLawCode prev(codes.size());
  for (std::size_t b = 0; b < static_cast<std::size_t>(batch); ++b) {
    if (len == 0) continue;
    prev[b * len] = dsp::kMuLawZeroCode;
    std::copy(codes.begin() + static_cast<std::ptrdiff_t>(b * len),
              codes.begin() + static_cast<std::ptrdiff_t>(b * len + len - 1),
              prev.begin() + static_cast<std::ptrdiff_t>(b * len + 1));
  }
  return prev;
}

nn::Tensor condition(const QuantizedEncoding& q) {
  const auto speech_cols = q.vectors.cols();
  const auto spk = static_cast<std::int64_t>(q.speaker_vector.size());
  nn::Tensor out = nn::Tensor::matrix(q.frames, speech_cols + spk);
  for (int t = 0; t < q.frames; ++t) {
    out.mat().row(t).head(speech_cols) = q.vectors.mat().row(t);
    for (std::int64_t j = 0; j < spk; ++j) out.at(t, speech_cols + j) = q.speaker_vector[static_cast<std::size_t>(j)];
  }
  return out;
}

Decoder::Decoder(const DecoderConfig& cfg, int conditioning_dim, nn::Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const int h1 = cfg_.frame_gru_hidden, h2 = cfg_.sample_gru_hidden;
  frame_gru_ = nn::Gru("decoder.frame_gru", conditioning_dim, h1, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(h2));
  frame_to_gates_ = nn::Dense("decoder.sample_gru.w_ih_cond", h1, 3 * h2, rng);
  const int prev_rows = cfg_.prev_sample_embedding ? cfg_.output_classes : 1;
  prev_weight_ = nn::Parameter("decoder.sample_gru.w_ih_prev", nn::uniform_tensor({prev_rows, 3 * h2}, bound, rng));
  w_hh_ = nn::Parameter("decoder.sample_gru.w_hh", nn::uniform_tensor({h2, 3 * h2}, bound, rng));
  b_hh_ = nn::Parameter("decoder.sample_gru.b_hh", nn::uniform_tensor({3 * h2}, bound, rng));
  out1_ = nn::Dense("decoder.out1", h2, cfg_.dense_hidden, rng);
  out2_ = nn::Dense("decoder.out2", cfg_.dense_hidden, cfg_.output_classes, rng);
}

nn::Var Decoder::conditioning(nn::Tape&, nn::Var speech, nn::Var speaker, int batch) const {
  if (speaker.rows() != batch || speech.rows() % batch != 0) {
    throw invalid_input("conditioning: batch mismatch between speech and speaker codes");
  }
  const int frames = static_cast<int>(speech.rows() / batch);
  return nn::concat_cols({speech, nn::repeat_rows(speaker, frames)});
}

nn::Var Decoder::teacher_forced_logits(nn::Tape& tape, nn::Var cond, int batch,
                                       std::span<const std::uint8_t> previous) {
  const std::int64_t expected = cond.rows() * cfg_.upsample_factor;
  if (static_cast<std::int64_t>(previous.size()) != expected) {
    throw invalid_input("decoder: " + std::to_string(previous.size()) + " previous samples supplied but " +
                        std::to_string(cond.rows()) + " conditioning frames need " + std::to_string(expected));
  }
  const nn::Var frame = frame_gru_.forward(tape, cond, batch);
  const nn::Var gates = frame_to_gates_.forward(tape, frame);
  nn::RowLookupInput prev;
  prev.weight = tape.param(prev_weight_);
  prev.index.resize(previous.size());
  prev.value.resize(previous.size());
  for (std::size_t i = 0; i < previous.size(); ++i) {
    if (cfg_.prev_sample_embedding) {
      prev.index[i] = previous[i];
      prev.value[i] = 1.0;
    } else {
      prev.index[i] = 0;
      prev.value[i] = dsp::mulaw_code_to_unit(previous[i]);
    }
  }
  const nn::Var h = nn::gru_recurrence(gates, tape.param(w_hh_), tape.param(b_hh_), batch, cfg_.upsample_factor, &prev);
  const nn::Var hidden = nn::relu(out1_.forward(tape, h));
  return out2_.forward(tape, hidden);
}

nn::Tensor Decoder::frame_gates(const nn::Tensor& cond) {
  nn::Tape tape;
  const nn::Var c = tape.constant(cond, "conditioning");
  return frame_to_gates_.forward(tape, frame_gru_.forward(tape, c, 1)).value();
}

dsp::MuLawCode Decoder::generate(const nn::Tensor& cond, std::uint64_t seed, double temperature) {
  if (temperature < 0.0) throw invalid_input("temperature must be >= 0");
  Stream stream(*this, frame_gates(cond));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  dsp::MuLawCode out(static_cast<std::size_t>(stream.length()));
  std::uint8_t prev = dsp::kMuLawZeroCode;
  for (auto& code : out) {
    const auto logits = stream.step(prev);
    code = static_cast<std::uint8_t>(sample_logits(logits, temperature, uni(rng)));
    prev = code;
  }
  return out;
}

void Decoder::register_state(nn::StateRegistry& reg) {
  frame_gru_.register_state(reg);
  frame_to_gates_.register_state(reg);
  reg.add(prev_weight_);
  reg.add(w_hh_);
  reg.add(b_hh_);
  out1_.register_state(reg);
  out2_.register_state(reg);
}

Decoder::Stream::Stream(const Decoder& dec, nn::Tensor frame_gates)
    : dec_(dec),
      gates_(std::move(frame_gates)),
      h_(static_cast<std::size_t>(dec.cfg_.sample_gru_hidden), 0.0),
      gx_(static_cast<std::size_t>(3 * dec.cfg_.sample_gru_hidden)),
      hidden_(static_cast<std::size_t>(dec.cfg_.dense_hidden)),
      logits_(static_cast<std::size_t>(dec.cfg_.output_classes)) {
  if (gates_.cols() != 3 * dec.cfg_.sample_gru_hidden) throw invalid_input("decoder stream: bad frame gates");
}

std::int64_t Decoder::Stream::length() const { return gates_.rows() * dec_.cfg_.upsample_factor; }

std::span<const double> Decoder::Stream::step(std::uint8_t previous) {
  if (position_ >= length()) throw invalid_input("decoder stream: no conditioning left");
  using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
  const auto frame = position_ / dec_.cfg_.upsample_factor;
  Eigen::Map<RowVec> gx(gx_.data(), static_cast<Eigen::Index>(gx_.size()));
  const nn::Tensor& pw = dec_.prev_weight_.value;
  if (dec_.cfg_.prev_sample_embedding) {
    gx = gates_.mat().row(frame) + pw.mat().row(previous);
  } else {
    gx = gates_.mat().row(frame) + dsp::mulaw_code_to_unit(previous) * pw.mat().row(0);
  }
  nn::gru_step(dec_.w_hh_.value, dec_.b_hh_.value, gx_, h_);
  Eigen::Map<const RowVec> h(h_.data(), static_cast<Eigen::Index>(h_.size()));
  Eigen::Map<RowVec> hidden(hidden_.data(), static_cast<Eigen::Index>(hidden_.size()));
  Eigen::Map<RowVec> logits(logits_.data(), static_cast<Eigen::Index>(logits_.size()));
  const auto& o1 = dec_.out1_;
  const auto& o2 = dec_.out2_;
  hidden.noalias() = h * o1.weight.value.mat();
  hidden += Eigen::Map<const RowVec>(o1.bias.value.data(), hidden.size());
  hidden = hidden.cwiseMax(0.0);
  logits.noalias() = hidden * o2.weight.value.mat();
  logits += Eigen::Map<const RowVec>(o2.bias.value.data(), logits.size());
  ++position_;
  return logits_;
}

int sample_logits(std::span<const double> logits, double temperature, double uniform01) {
  if (logits.empty()) throw invalid_input("sample_logits: empty logits");
  const auto argmax = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  if (temperature == 0.0) return argmax;
  const double mx = logits[static_cast<std::size_t>(argmax)];
  std::vector<double> cdf(logits.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    acc += std::exp((logits[k] - mx) / temperature);
    cdf[k] = acc;
  }
  const double u = uniform01 * acc;
  for (std::size_t k = 0; k < cdf.size(); ++k) {
    if (u < cdf[k]) return static_cast<int>(k);
  }
  return static_cast<int>(cdf.size() - 1);
}

}  // namespace vqwave
