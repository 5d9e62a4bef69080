#include "vqwave/train/enhancer.hpp"

#include <cstring>

#include "vqwave/error.hpp"

namespace vqwave::train {

namespace {

std::vector<int> argmax_rows(const nn::Tensor& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (std::int64_t r = 0; r < logits.rows(); ++r) {
    Eigen::Index k = 0;
    logits.mat().row(r).maxCoeff(&k);
    out[static_cast<std::size_t>(r)] = static_cast<int>(k);
  }
  return out;
}

}  // namespace

LatentEnhancer::LatentEnhancer(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  nn::Rng rng(seed);
  encoder = Encoder(cfg.encoder, rng, "enhancer.encoder");
  for (int h = 0; h < cfg.quantizer.num_speech_codebooks; ++h) {
    speech_proj.emplace_back("enhancer.speech.h" + std::to_string(h) + ".proj", cfg.encoder.filters,
                             cfg.quantizer.code_dim, rng);
  }
  speaker_proj = nn::Dense("enhancer.speaker.proj", cfg.encoder.speaker_filters, cfg.quantizer.code_dim, rng);
  encoder.register_state(registry_);
  for (auto& p : speech_proj) p.register_state(registry_);
  speaker_proj.register_state(registry_);
}

LatentEnhancer::Output LatentEnhancer::forward(nn::Tape& tape, const nn::Tensor& mel, int batch, nn::Mode mode,
                                               const Bottleneck& frozen) {
  const auto& heads = frozen.speech_heads();
  if (heads.size() != speech_proj.size()) throw incompatible("enhancer and frozen codec differ in codebook count");
  const auto enc = encoder.forward(tape, mel, batch, mode);
  Output out;
  out.frames = enc.frames;
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const nn::Var e = speech_proj[h].forward(tape, enc.speech);
    out.speech_logits.push_back(nn::negative_squared_distance(e, heads[h].codebook.codes));
    out.speech_pred.push_back(argmax_rows(out.speech_logits.back().value()));
  }
  const nn::Var s = speaker_proj.forward(tape, enc.speaker);
  out.speaker_logits = nn::negative_squared_distance(s, frozen.speaker_head().codebook.codes);
  out.speaker_pred = argmax_rows(out.speaker_logits.value());
  return out;
}

QuantizedEncoding LatentEnhancer::predict(CodecModel& frozen, const dsp::Waveform& x) {
  nn::Tape tape;
  const auto out = forward(tape, frozen.mel_features({x}), 1, nn::Mode::Eval, frozen.bottleneck);
  const auto heads = out.speech_pred.size();
  std::vector<int> indices(static_cast<std::size_t>(out.frames) * heads);
  for (int t = 0; t < out.frames; ++t)
    for (std::size_t h = 0; h < heads; ++h) indices[static_cast<std::size_t>(t) * heads + h] = out.speech_pred[h][t];
  return frozen.bottleneck.lookup(indices, out.frames, out.speaker_pred[0]);
}

CodeTargets codec_assignments(CodecModel& frozen, const std::vector<dsp::Waveform>& clean) {
  nn::Tape tape;
  const auto enc = frozen.encoder.forward(tape, frozen.mel_features(clean), static_cast<int>(clean.size()), nn::Mode::Eval);
  const auto q = frozen.bottleneck.forward(tape, enc, nn::Mode::Eval, nullptr);
  CodeTargets t;
  for (const auto& h : q.heads) t.speech.push_back(h.indices);
  t.speaker = q.speaker_head.indices;
  return t;
}

std::pair<double, double> enhancer_accuracy(CodecModel& frozen, LatentEnhancer& enh, const Batch& data) {
  const CodeTargets targets = codec_assignments(frozen, data.target);
  nn::Tape tape;
  const auto out = enh.forward(tape, frozen.mel_features(data.x), data.size(), nn::Mode::Eval, frozen.bottleneck);
  std::size_t hit = 0, total = 0;
  for (std::size_t h = 0; h < targets.speech.size(); ++h) {
    for (std::size_t i = 0; i < targets.speech[h].size(); ++i) hit += out.speech_pred[h][i] == targets.speech[h][i];
    total += targets.speech[h].size();
  }
  std::size_t spk = 0;
  for (std::size_t i = 0; i < targets.speaker.size(); ++i) spk += out.speaker_pred[i] == targets.speaker[i];
  return {static_cast<double>(hit) / static_cast<double>(std::max<std::size_t>(total, 1)),
          static_cast<double>(spk) / static_cast<double>(std::max<std::size_t>(targets.speaker.size(), 1))};
}

std::vector<nn::Tensor> snapshot_state(const nn::StateRegistry& reg) {
  std::vector<nn::Tensor> out;
  for (const auto* p : reg.params) out.push_back(p->value);
  for (const auto& b : reg.buffers) out.push_back(*b.tensor);
  return out;
}

bool same_state(const std::vector<nn::Tensor>& a, const std::vector<nn::Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].same_shape(b[i])) return false;
    if (std::memcmp(a[i].data(), b[i].data(), a[i].size() * sizeof(nn::Scalar)) != 0) return false;
  }
  return true;
}

EnhancerReport train_latent_enhancer(CodecModel& frozen, LatentEnhancer& enh, const BatchSource& source,
                                     const EnhancerConfig& cfg, const Batch& eval_data) {
  const auto before = snapshot_state(frozen.registry());
  nn::Adam opt(cfg.adam);
  EnhancerReport report;
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    const Batch batch = source(step);
    const CodeTargets targets = codec_assignments(frozen, batch.target);
    nn::Tape tape;
    const auto out = enh.forward(tape, frozen.mel_features(batch.x), batch.size(), nn::Mode::Train, frozen.bottleneck);
    nn::Var loss = nn::softmax_cross_entropy(out.speaker_logits, targets.speaker);
    for (std::size_t h = 0; h < out.speech_logits.size(); ++h) {
      loss = nn::add(loss, nn::softmax_cross_entropy(out.speech_logits[h], targets.speech[h]));
    }
    check_finite(tape, loss);
    report.loss.push_back(loss.item());
    opt.zero_grad(enh.parameters());
    tape.backward(loss);
    check_finite_gradients(enh.parameters());
    opt.step(enh.parameters());
  }
  std::tie(report.accuracy, report.speaker_accuracy) = enhancer_accuracy(frozen, enh, eval_data);
  report.frozen_unchanged = same_state(before, snapshot_state(frozen.registry()));
  return report;
}

}  // namespace vqwave::train
