#include "vqwave/codec_model.hpp"

#include <cmath>

#include "vqwave/dsp/mel.hpp"
#include "vqwave/dsp/mulaw.hpp"
#include "vqwave/error.hpp"

namespace vqwave {

CodecModel::CodecModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  encoder = Encoder(cfg_.encoder, rng);
  bottleneck = Bottleneck(cfg_.quantizer, cfg_.encoder.filters, cfg_.encoder.speaker_filters, rng);
  decoder = Decoder(cfg_.decoder, cfg_.conditioning_dim(), rng);
  encoder.register_state(registry_);
  bottleneck.register_state(registry_);
  decoder.register_state(registry_);
}

nn::Tensor CodecModel::mel_features(const std::vector<dsp::Waveform>& clips) const {
  std::vector<dsp::LogMelSpectrogram> mels;
  mels.reserve(clips.size());
  for (const auto& c : clips) {
    c.require_codec_rate();
    mels.push_back(dsp::log_mel(c, cfg_.mel));
  }
  return stack_mel(mels);
}

CodecModel::Forward CodecModel::forward(nn::Tape& tape, const Batch& batch, nn::Mode mode, nn::Rng* init_rng,
                                        const FixedAssignments* fixed) {
  const int b = batch.size();
  if (b < 1 || batch.target.size() != batch.x.size()) throw invalid_input("batch: need equal numbers of inputs and targets");
  const std::size_t len = batch.x[0].size();
  for (int i = 0; i < b; ++i) {
    if (batch.x[i].size() != len || batch.target[i].size() != len) {
      throw invalid_input("batch: all inputs and targets must have the same length");
    }
  }

  Forward f;
  f.encoded = encoder.forward(tape, mel_features(batch.x), b, mode);
  f.quantized = bottleneck.forward(tape, f.encoded, mode, init_rng, fixed);
  const std::size_t samples = static_cast<std::size_t>(f.encoded.frames) * cfg_.decoder.upsample_factor;
  if (samples != len) {
    throw invalid_input("batch: clip length " + std::to_string(len) + " does not map to whole latent frames (" +
                        std::to_string(f.encoded.frames) + " frames give " + std::to_string(samples) + " samples)");
  }

  dsp::MuLawCode codes;
  codes.reserve(len * static_cast<std::size_t>(b));
  for (const auto& t : batch.target) {
    const auto c = dsp::mulaw_encode(t);
    codes.insert(codes.end(), c.begin(), c.end());
  }
  f.targets.assign(codes.begin(), codes.end());
  const dsp::MuLawCode previous = shift_for_teacher_forcing(codes, b);

  const nn::Var cond = decoder.conditioning(tape, f.quantized.speech, f.quantized.speaker, b);
  f.logits = decoder.teacher_forced_logits(tape, cond, b, previous);
  f.ce = nn::softmax_cross_entropy(f.logits, f.targets);
  f.commitment = f.quantized.commitment;
  f.total = nn::add(f.ce, f.commitment);
  return f;
}

QuantizedEncoding CodecModel::encode(const dsp::Waveform& w) {
  nn::Tape tape;
  const auto enc = encoder.forward(tape, mel_features({w}), 1, nn::Mode::Eval);
  const auto q = bottleneck.forward(tape, enc, nn::Mode::Eval, nullptr);
  return q.utterance(0);
}

dsp::Waveform CodecModel::decode(const QuantizedEncoding& q, std::uint64_t seed, double temperature) {
  const auto codes = decoder.generate(condition(q), seed, temperature);
  return dsp::mulaw_decode(codes, cfg_.mel.sample_rate);
}

BitstreamHeader CodecModel::stream_header(std::uint32_t frames, int speaker_index) const {
  BitstreamHeader h;
  h.sample_rate = static_cast<std::uint32_t>(cfg_.mel.sample_rate);
  h.latent_rate = static_cast<std::uint16_t>(std::lround(cfg_.latent_rate()));
  h.num_speech_codebooks = static_cast<std::uint8_t>(cfg_.quantizer.num_speech_codebooks);
  h.speaker_index = static_cast<std::uint16_t>(speaker_index);
  h.frame_count = frames;
  return h;
}

std::vector<std::uint8_t> CodecModel::encode_to_bytes(const dsp::Waveform& w) {
  w.require_codec_rate();
  const QuantizedEncoding q = encode(w);
  return pack(stream_header(static_cast<std::uint32_t>(q.frames), q.speaker_index), q.indices);
}

dsp::Waveform CodecModel::decode_bytes(std::span<const std::uint8_t> bytes, std::uint64_t seed, double temperature) {
  const UnpackedStream s = unpack(bytes);
  const auto& h = s.header;
  if (h.num_speech_codebooks != cfg_.quantizer.num_speech_codebooks) {
    throw incompatible("stream has " + std::to_string(h.num_speech_codebooks) + " speech codebooks but the model has " +
                       std::to_string(cfg_.quantizer.num_speech_codebooks));
  }
  if (h.sample_rate != static_cast<std::uint32_t>(cfg_.mel.sample_rate)) {
    throw incompatible("stream sample rate " + std::to_string(h.sample_rate) + " Hz but the model runs at " +
                       std::to_string(cfg_.mel.sample_rate) + " Hz");
  }
  if (h.latent_rate != std::lround(cfg_.latent_rate())) {
    throw incompatible("stream latent rate " + std::to_string(h.latent_rate) + " Hz but the model produces " +
                       std::to_string(std::lround(cfg_.latent_rate())) + " Hz");
  }
  const QuantizedEncoding q = bottleneck.lookup(s.indices, static_cast<int>(h.frame_count), h.speaker_index);
  if (h.frame_count == 0) return dsp::Waveform({}, cfg_.mel.sample_rate);
  return decode(q, seed, temperature);
}

}  // namespace vqwave
