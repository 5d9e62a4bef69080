#pragma once

#include <vector>

#include "gradcheck.hpp"
#include "vqwave/codec_model.hpp"
#include "vqwave/dsp/mulaw.hpp"
#include "vqwave/nn/ops.hpp"

namespace vqwave::testing {

/// The full codec loss with every quantizer replaced by e + offset, where the
/// offset (e_hat - e) is captured once at the base point. With the offset
/// frozen the loss is smooth in all parameters, equals the model loss at the
/// base point, and its gradient is the straight-through gradient, so central
/// differences can check the composed encoder -> quantizer -> decoder graph.
class FrozenQuantizerLoss {
 public:
  FrozenQuantizerLoss(CodecModel& model, const Batch& batch) : model_(model), batch_(batch) {
    mel_ = model.mel_features(batch.x);
    dsp::MuLawCode codes;
    for (const auto& t : batch.target) {
      const auto c = dsp::mulaw_encode(t);
      codes.insert(codes.end(), c.begin(), c.end());
    }
    targets_.assign(codes.begin(), codes.end());
    previous_ = shift_for_teacher_forcing(codes, batch.size());

    nn::Tape tape;
    const auto enc = model.encoder.forward(tape, mel_, batch.size(), nn::Mode::Train);
    const auto q = model.bottleneck.forward(tape, enc, nn::Mode::Train, nullptr);
    for (const auto& h : q.heads) {
      speech_offsets_.push_back(difference(h.codes, h.projected.value()));
      speech_codes_.push_back(h.codes);
    }
    speaker_offset_ = difference(q.speaker_head.codes, q.speaker_head.projected.value());
    speaker_codes_ = q.speaker_head.codes;
    assignments_ = q.assignments();
  }

  nn::Var operator()(nn::Tape& tape) const {
    auto& m = model_;
    const double lambda = m.config().quantizer.commitment;
    const auto enc = m.encoder.forward(tape, mel_, batch_.size(), nn::Mode::Train);
    std::vector<nn::Var> parts;
    nn::Var commitment;
    for (std::size_t h = 0; h < m.bottleneck.speech_heads().size(); ++h) {
      const nn::Var e = m.bottleneck.speech_heads()[h].project(tape, enc.speech);
      parts.push_back(nn::straight_through(e, sum_of(e.value(), speech_offsets_[h])));
      const nn::Var c = vq_loss(e, speech_codes_[h], lambda);
      commitment = commitment.valid() ? nn::add(commitment, c) : c;
    }
    const nn::Var s = m.bottleneck.speaker_head().project(tape, enc.speaker);
    const nn::Var speaker = nn::straight_through(s, sum_of(s.value(), speaker_offset_));
    commitment = nn::add(vq_loss(s, speaker_codes_, lambda), commitment);
    const nn::Var speech = parts.size() == 1 ? parts.front() : nn::concat_cols(parts);
    const nn::Var cond = m.decoder.conditioning(tape, speech, speaker, batch_.size());
    const nn::Var logits = m.decoder.teacher_forced_logits(tape, cond, batch_.size(), previous_);
    return nn::add(nn::softmax_cross_entropy(logits, targets_), commitment);
  }

  /// Assignments made at the base point, for running the real model forward.
  const FixedAssignments& assignments() const { return assignments_; }

 private:
  static nn::Tensor difference(const nn::Tensor& a, const nn::Tensor& b) {
    nn::Tensor d = a;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= b[i];
    return d;
  }
  static nn::Tensor sum_of(const nn::Tensor& a, const nn::Tensor& b) {
    nn::Tensor d = a;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += b[i];
    return d;
  }

  CodecModel& model_;
  Batch batch_;
  nn::Tensor mel_;
  std::vector<int> targets_;
  dsp::MuLawCode previous_;
  std::vector<nn::Tensor> speech_offsets_, speech_codes_;
  nn::Tensor speaker_offset_, speaker_codes_;
  FixedAssignments assignments_;
};

}  // namespace vqwave::testing
