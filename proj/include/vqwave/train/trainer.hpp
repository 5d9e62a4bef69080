#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "vqwave/codec_model.hpp"
#include "vqwave/data/manifest.hpp"
#include "vqwave/nn/adam.hpp"
#include "vqwave/train/config.hpp"

namespace vqwave::train {

struct LossReport {
  double total = 0.0;  // ce + vq_commitment, the optimised quantity
  double ce = 0.0;
  double vq_commitment = 0.0;
  double codebook_error = 0.0;     // logged only; codebooks move by EMA
  std::vector<double> perplexity;  // per speech head
  double speaker_perplexity = 0.0;

  bool operator==(const LossReport&) const = default;
};

/// Produces the batch for a given (0-based) step; must be deterministic.
using BatchSource = std::function<Batch(std::int64_t step)>;

/// Batches drawn from a corpus with an rng derived from (seed, step).
BatchSource corpus_source(data::Corpus& corpus, const TrainConfig& cfg);

/// Cycles through a fixed list of examples, `batch_size` at a time.
BatchSource fixed_source(Batch examples, int batch_size);

/// Rng for a (seed, step, stream) triple, independent of call history.
std::mt19937_64 derived_rng(std::uint64_t seed, std::int64_t step, std::uint64_t stream);

/// Loss terms of one forward pass (batch statistics; no parameter update).
LossReport total_loss(CodecModel& model, const Batch& batch, nn::Rng* init_rng = nullptr);

/// Throws ErrorKind::Numerical naming the first non-finite tensor on `tape`
/// when `loss` is not finite.
void check_finite(const nn::Tape& tape, nn::Var loss);
/// Throws ErrorKind::Numerical naming the first parameter with a non-finite gradient.
void check_finite_gradients(const std::vector<nn::Parameter*>& params);

class Trainer {
 public:
  Trainer(TrainConfig cfg, BatchSource source);

  /// Forward, backward, Adam update, then EMA update of every codebook.
  LossReport train_step(const Batch& batch);
  /// Draws the batch for the current step from the source and trains on it.
  LossReport step();
  /// Runs until config().steps; calls on_step after every step.
  void run(const std::function<void(std::int64_t, const LossReport&)>& on_step = {});

  void save(const std::filesystem::path& path);
  /// Restores model, optimizer and step counter. The checkpoint config must
  /// describe the same architecture.
  void load(const std::filesystem::path& path);

  CodecModel& model() { return *model_; }
  const TrainConfig& config() const { return cfg_; }
  std::int64_t steps_done() const { return optimizer_.steps(); }

 private:
  TrainConfig cfg_;
  BatchSource source_;
  std::unique_ptr<CodecModel> model_;
  nn::Adam optimizer_;
};

/// Reads the configuration stored in a checkpoint.
TrainConfig checkpoint_config(const std::filesystem::path& path);
/// Model restored from a checkpoint (for encode, decode and eval).
std::unique_ptr<CodecModel> load_model(const std::filesystem::path& path);

}  // namespace vqwave::train
