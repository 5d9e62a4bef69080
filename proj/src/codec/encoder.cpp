#include "vqwave/encoder.hpp"

#include <string>

#include "vqwave/error.hpp"

namespace vqwave {

nn::Tensor stack_mel(const std::vector<dsp::LogMelSpectrogram>& mels) {
  if (mels.empty()) throw invalid_input("stack_mel: empty batch");
  const int frames = mels.front().frames, bins = mels.front().bins;
  nn::Tensor out = nn::Tensor::matrix(static_cast<std::int64_t>(mels.size()) * frames, bins);
  std::size_t at = 0;
  for (const auto& m : mels) {
    if (m.frames != frames || m.bins != bins) throw invalid_input("stack_mel: spectrograms differ in shape");
    std::copy(m.values.begin(), m.values.end(), out.values().begin() + static_cast<std::ptrdiff_t>(at));
    at += m.values.size();
  }
  return out;
}

int latent_frame_count(int mel_frames, const EncoderConfig& cfg) {
  int t = mel_frames;
  for (int s : cfg.strides) t = nn::conv1d_output_length(t, s);
  return t;
}

Encoder::Encoder(const EncoderConfig& cfg, nn::Rng& rng, const std::string& prefix) : cfg_(cfg) {
  cfg_.validate();
  int in = cfg_.mel_bins;
  for (int i = 0; i < cfg_.num_layers(); ++i) {
    const std::string name = prefix + ".speech." + std::to_string(i);
    speech_.push_back({nn::Conv1d(name + ".conv", in, cfg_.filters, cfg_.kernels[i], cfg_.strides[i], rng),
                       nn::BatchNorm(name + ".bn", cfg_.filters)});
    in = cfg_.filters;
  }
  in = cfg_.mel_bins;
  for (int i = 0; i < cfg_.speaker_layers(); ++i) {
    const std::string name = prefix + ".speaker." + std::to_string(i);
    speaker_.push_back({nn::Conv1d(name + ".conv", in, cfg_.speaker_filters, cfg_.speaker_kernels[i],
                                   cfg_.speaker_strides[i], rng),
                        nn::BatchNorm(name + ".bn", cfg_.speaker_filters)});
    in = cfg_.speaker_filters;
  }
}

nn::Var Encoder::run_stack(nn::Tape& tape, std::vector<Block>& stack, nn::Var x, int batch, nn::Mode mode) {
  for (Block& b : stack) x = nn::relu(b.norm.forward(tape, b.conv.forward(tape, x, batch), mode));
  return x;
}

nn::Var Encoder::forward_speech(nn::Tape& tape, nn::Var mel, int batch, nn::Mode mode) {
  return run_stack(tape, speech_, mel, batch, mode);
}

nn::Var Encoder::forward_speaker(nn::Tape& tape, nn::Var mel, int batch, nn::Mode mode) {
  // mean of the post-ReLU output of the last speaker layer
  return nn::sequence_mean(run_stack(tape, speaker_, mel, batch, mode), batch);
}

Encoder::Output Encoder::forward(nn::Tape& tape, const nn::Tensor& mel, int batch, nn::Mode mode) {
  if (batch < 1 || mel.rows() % batch != 0) throw invalid_input("encoder: mel rows not divisible by batch");
  if (mel.cols() != cfg_.mel_bins) {
    throw invalid_input("encoder: expected " + std::to_string(cfg_.mel_bins) + " mel bins, got " +
                        std::to_string(mel.cols()));
  }
  const int frames = static_cast<int>(mel.rows() / batch);
  if (frames < 2) throw invalid_input("input too short");
  const nn::Var x = tape.constant(mel, "mel");
  Output out;
  out.batch = batch;
  out.speech = forward_speech(tape, x, batch, mode);
  out.speaker = forward_speaker(tape, x, batch, mode);
  out.frames = static_cast<int>(out.speech.rows() / batch);
  return out;
}

void Encoder::register_state(nn::StateRegistry& reg) {
  for (Block& b : speech_) {
    b.conv.register_state(reg);
    b.norm.register_state(reg);
  }
  for (Block& b : speaker_) {
    b.conv.register_state(reg);
    b.norm.register_state(reg);
  }
}

Encoding encode_speech(Encoder& enc, const dsp::LogMelSpectrogram& mel, nn::Mode mode) {
  if (mel.frames < 2) throw invalid_input("input too short");
  nn::Tape tape;
  const nn::Var x = tape.constant(stack_mel({mel}), "mel");
  Encoding e;
  e.frames = enc.forward_speech(tape, x, 1, mode).value();
  e.source_duration = mel.frames * mel.hop_seconds;
  return e;
}

SpeakerEmbedding encode_speaker(Encoder& enc, const dsp::LogMelSpectrogram& mel, nn::Mode mode) {
  if (mel.frames < 2) throw invalid_input("input too short");
  nn::Tape tape;
  const nn::Var x = tape.constant(stack_mel({mel}), "mel");
  const nn::Tensor v = enc.forward_speaker(tape, x, 1, mode).value();
  return {std::vector<double>(v.values().begin(), v.values().end())};
}

}  // namespace vqwave
