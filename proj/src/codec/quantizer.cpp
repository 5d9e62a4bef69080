#include "vqwave/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "vqwave/error.hpp"

namespace vqwave {

Codebook::Codebook(std::string name_, int size, int dim, double decay_, double epsilon_, nn::Rng& rng)
    : name(std::move(name_)), decay(decay_), epsilon(epsilon_) {
  std::normal_distribution<double> dist(0.0, 1.0);
  nn::Tensor init = nn::Tensor::matrix(size, dim);
  for (auto& v : init.values()) v = dist(rng);
  set_codes(init);
  initialized_flag[0] = 0.0;
}

void Codebook::set_codes(const nn::Tensor& new_codes) {
  codes = new_codes;
  ema_count = nn::Tensor({codes.rows()}, 1.0);
  ema_sum = codes;
  initialized_flag[0] = 1.0;
}

void Codebook::initialize_from(const nn::Tensor& vectors, nn::Rng& rng) {
  if (vectors.rows() < 1 || vectors.cols() != dim()) throw invalid_input("codebook init: bad vector batch");
  const auto k = size();
  const auto n = vectors.rows();
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  nn::Tensor init = nn::Tensor::matrix(k, dim());
  std::uniform_int_distribution<std::int64_t> pick(0, n - 1);
  for (int i = 0; i < k; ++i) {
    const auto src = i < n ? order[static_cast<std::size_t>(i)] : pick(rng);
    init.mat().row(i) = vectors.mat().row(src);
  }
  set_codes(init);
}

void Codebook::ema_update(const nn::Tensor& vectors, std::span<const int> assignments) {
  if (static_cast<std::int64_t>(assignments.size()) != vectors.rows() || vectors.cols() != dim()) {
    throw invalid_input("ema_update: assignments do not match vectors");
  }
  const int k = size();
  std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
  nn::Matrix sums = nn::Matrix::Zero(k, dim());
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const int j = assignments[i];
    if (j < 0 || j >= k) throw invalid_input("ema_update: assignment out of range");
    counts[static_cast<std::size_t>(j)] += 1.0;
    sums.row(j) += vectors.mat().row(static_cast<Eigen::Index>(i));
  }
  for (int j = 0; j < k; ++j) {
    ema_count[static_cast<std::size_t>(j)] = decay * ema_count[static_cast<std::size_t>(j)] +
                                             (1.0 - decay) * counts[static_cast<std::size_t>(j)];
    ema_sum.mat().row(j) = decay * ema_sum.mat().row(j) + (1.0 - decay) * sums.row(j);
    codes.mat().row(j) = ema_sum.mat().row(j) / std::max(ema_count[static_cast<std::size_t>(j)], epsilon);
  }
}

void Codebook::register_state(nn::StateRegistry& reg) {
  reg.add_buffer(name + ".codes", codes);
  reg.add_buffer(name + ".ema_count", ema_count);
  reg.add_buffer(name + ".ema_sum", ema_sum);
  reg.add_buffer(name + ".initialized", initialized_flag);
}

std::pair<int, double> quantize_nearest(std::span<const double> e, const Codebook& cb) {
  if (static_cast<int>(e.size()) != cb.dim()) throw invalid_input("quantize_nearest: dimension mismatch");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  const std::size_t d = e.size();
  for (int k = 0; k < cb.size(); ++k) {
    const double* c = cb.codes.data() + static_cast<std::size_t>(k) * d;
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double diff = e[i] - c[i];
      acc += diff * diff;
    }
    if (acc < best_d) {
      best_d = acc;
      best = k;
    }
  }
  return {best, best_d};
}

double codebook_perplexity(std::span<const int> indices) {
  if (indices.empty()) throw invalid_input("codebook_perplexity: empty index sequence");
  std::map<int, std::size_t> hist;
  for (int i : indices) ++hist[i];
  double entropy = 0.0;
  const double n = static_cast<double>(indices.size());
  for (const auto& [code, count] : hist) {
    const double p = static_cast<double>(count) / n;
    entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

nn::Var vq_loss(nn::Var e, const nn::Tensor& e_hat, double lambda) {
  const nn::Var target = e.tape->constant(e_hat, "codes");
  return nn::scale(nn::mean_squared_distance(e, target), lambda);
}

QuantizerHead::QuantizerHead(std::string name, int in_dim, const QuantizerConfig& cfg, nn::Rng& rng)
    : projection(name + ".proj", in_dim, cfg.code_dim, rng),
      codebook(name + ".codebook", cfg.codebook_size(), cfg.code_dim, cfg.ema_decay, cfg.ema_epsilon, rng) {}

nn::Var QuantizerHead::project(nn::Tape& tape, nn::Var input) { return projection.forward(tape, input); }

QuantizerHead::Output QuantizerHead::forward(nn::Tape& tape, nn::Var input, nn::Mode mode, nn::Rng* init_rng,
                                             double commitment, std::span<const int> fixed) {
  Output out;
  out.projected = project(tape, input);
  const nn::Tensor& e = out.projected.value();
  if (mode == nn::Mode::Train && !codebook.initialized()) {
    if (init_rng == nullptr) throw invalid_input("codebook initialisation needs a random generator");
    codebook.initialize_from(e, *init_rng);
  }
  const auto rows = e.rows();
  if (!fixed.empty() && static_cast<std::int64_t>(fixed.size()) != rows) {
    throw invalid_input("fixed assignments do not match the number of frames");
  }
  out.indices.resize(static_cast<std::size_t>(rows));
  out.codes = nn::Tensor::matrix(rows, e.cols());
  double err = 0.0;
  for (std::int64_t r = 0; r < rows; ++r) {
    int idx;
    if (fixed.empty()) {
      idx = quantize_nearest(e.row(r), codebook).first;
    } else {
      idx = fixed[static_cast<std::size_t>(r)];
      if (idx < 0 || idx >= codebook.size()) throw invalid_input("fixed assignment out of range");
    }
    out.indices[static_cast<std::size_t>(r)] = idx;
    out.codes.mat().row(r) = codebook.codes.mat().row(idx);
    err += (e.mat().row(r) - out.codes.mat().row(r)).squaredNorm();
  }
  out.codebook_error = rows > 0 ? err / static_cast<double>(rows) : 0.0;
  out.quantized = nn::straight_through(out.projected, out.codes);
  out.commitment = vq_loss(out.projected, out.codes, commitment);
  return out;
}

void QuantizerHead::register_state(nn::StateRegistry& reg) {
  projection.register_state(reg);
  codebook.register_state(reg);
}

Bottleneck::Bottleneck(const QuantizerConfig& cfg, int speech_in, int speaker_in, nn::Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  for (int h = 0; h < cfg_.num_speech_codebooks; ++h) {
    speech_.emplace_back("quantizer.speech." + std::to_string(h), speech_in, cfg_, rng);
  }
  speaker_ = QuantizerHead("quantizer.speaker", speaker_in, cfg_, rng);
}

Bottleneck::Output Bottleneck::forward(nn::Tape& tape, const Encoder::Output& enc, nn::Mode mode, nn::Rng* init_rng,
                                       const FixedAssignments* fixed) {
  Output out;
  out.batch = enc.batch;
  out.frames = enc.frames;
  std::vector<nn::Var> parts;
  for (std::size_t h = 0; h < speech_.size(); ++h) {
    std::span<const int> f;
    if (fixed != nullptr && h < fixed->speech.size()) f = fixed->speech[h];
    out.heads.push_back(speech_[h].forward(tape, enc.speech, mode, init_rng, cfg_.commitment, f));
    parts.push_back(out.heads.back().quantized);
  }
  std::span<const int> fs;
  if (fixed != nullptr) fs = fixed->speaker;
  out.speaker_head = speaker_.forward(tape, enc.speaker, mode, init_rng, cfg_.commitment, fs);
  out.speech = parts.size() == 1 ? parts.front() : nn::concat_cols(parts);
  out.speaker = out.speaker_head.quantized;

  nn::Var total = out.speaker_head.commitment;
  out.codebook_error = out.speaker_head.codebook_error;
  for (const auto& h : out.heads) {
    total = nn::add(total, h.commitment);
    out.codebook_error += h.codebook_error;
  }
  out.commitment = total;
  return out;
}

void Bottleneck::ema_update(const Output& out) {
  for (std::size_t h = 0; h < speech_.size(); ++h) {
    speech_[h].codebook.ema_update(out.heads[h].projected.value(), out.heads[h].indices);
  }
  speaker_.codebook.ema_update(out.speaker_head.projected.value(), out.speaker_head.indices);
}

FixedAssignments Bottleneck::Output::assignments() const {
  FixedAssignments f;
  for (const auto& h : heads) f.speech.push_back(h.indices);
  f.speaker = speaker_head.indices;
  return f;
}

QuantizedEncoding Bottleneck::Output::utterance(int b) const {
  QuantizedEncoding q;
  q.heads = static_cast<int>(heads.size());
  q.code_dim = static_cast<int>(speaker.cols());
  q.frames = frames;
  q.vectors = nn::Tensor::matrix(frames, speech.cols());
  q.vectors.mat() = speech.value().mat().middleRows(static_cast<Eigen::Index>(b) * frames, frames);
  q.indices.resize(static_cast<std::size_t>(frames) * q.heads);
  for (int t = 0; t < frames; ++t) {
    for (int h = 0; h < q.heads; ++h) {
      q.indices[static_cast<std::size_t>(t) * q.heads + h] =
          heads[static_cast<std::size_t>(h)].indices[static_cast<std::size_t>(b) * frames + t];
    }
  }
  q.speaker_index = speaker_head.indices[static_cast<std::size_t>(b)];
  const auto row = speaker.value().row(b);
  q.speaker_vector.assign(row.begin(), row.end());
  return q;
}

QuantizedEncoding Bottleneck::lookup(std::span<const int> indices, int frames, int speaker_index) const {
  const int heads = static_cast<int>(speech_.size());
  if (static_cast<std::int64_t>(indices.size()) != static_cast<std::int64_t>(frames) * heads) {
    throw invalid_input("lookup: index count does not match frames x heads");
  }
  QuantizedEncoding q;
  q.heads = heads;
  q.code_dim = cfg_.code_dim;
  q.frames = frames;
  q.indices.assign(indices.begin(), indices.end());
  q.vectors = nn::Tensor::matrix(frames, static_cast<std::int64_t>(heads) * cfg_.code_dim);
  for (int t = 0; t < frames; ++t) {
    for (int h = 0; h < heads; ++h) {
      const int idx = indices[static_cast<std::size_t>(t) * heads + h];
      const Codebook& cb = speech_[static_cast<std::size_t>(h)].codebook;
      if (idx < 0 || idx >= cb.size()) {
        throw incompatible("code index " + std::to_string(idx) + " exceeds codebook size " + std::to_string(cb.size()));
      }
      q.vectors.mat().block(t, static_cast<Eigen::Index>(h) * cfg_.code_dim, 1, cfg_.code_dim) = cb.codes.mat().row(idx);
    }
  }
  const Codebook& scb = speaker_.codebook;
  if (speaker_index < 0 || speaker_index >= scb.size()) {
    throw incompatible("speaker index " + std::to_string(speaker_index) + " exceeds codebook size " +
                       std::to_string(scb.size()));
  }
  q.speaker_index = speaker_index;
  const auto row = scb.codes.row(speaker_index);
  q.speaker_vector.assign(row.begin(), row.end());
  return q;
}

void Bottleneck::register_state(nn::StateRegistry& reg) {
  for (auto& h : speech_) h.register_state(reg);
  speaker_.register_state(reg);
}

}  // namespace vqwave
