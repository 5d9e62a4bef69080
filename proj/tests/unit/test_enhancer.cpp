#include <cmath>
#include <random>

#include "doctest.h"
#include "vqwave/data/mixing.hpp"
#include "vqwave/data/synthetic.hpp"
#include "vqwave/train/enhancer.hpp"
#include "vqwave/train/trainer.hpp"

using namespace vqwave;
using namespace vqwave::train;

namespace {

TrainConfig frozen_config() {
  TrainConfig cfg = tiny_config();
  cfg.mode = TrainMode::CodecOnly;
  cfg.batch_size = 2;
  cfg.sample_seconds = 0.5;
  cfg.adam.lr = 1e-3;
  cfg.seed = 3;
  return cfg;
}

Batch clips(int n, double snr_db, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Batch b;
  for (int i = 0; i < n; ++i) {
    const auto s = data::synthetic_speech(0.5, rng);
    const auto noise = data::synthetic_noise(data::SyntheticNoise::White, 0.5, rng);
    const auto m = data::mix_at_snr({s, noise, std::nullopt, snr_db, false});
    b.x.push_back(std::isinf(snr_db) ? m.target : m.x);
    b.target.push_back(m.target);
  }
  return b;
}

}  // namespace

TEST_CASE("identity task: clean input reproduces the frozen assignments; frozen state is untouched") {
  const auto cfg = frozen_config();
  const Batch clean = clips(2, INFINITY, 1);
  Trainer codec(cfg, fixed_source(clean, 2));
  for (int i = 0; i < 3; ++i) codec.step();

  LatentEnhancer enh(cfg.model, 9);
  const auto [before, before_spk] = enhancer_accuracy(codec.model(), enh, clean);
  CHECK(before < 0.5);
  EnhancerConfig ecfg;
  ecfg.steps = 400;
  ecfg.adam.lr = 3e-3;
  const auto report = train_latent_enhancer(codec.model(), enh, fixed_source(clean, 2), ecfg, clean);
  CHECK(report.frozen_unchanged);
  CHECK(report.loss.size() == 400);
  CHECK(report.loss.back() < report.loss.front());
  CHECK(report.accuracy >= 0.9);
  CHECK(report.speaker_accuracy == 1.0);
  (void)before_spk;

  const auto q = enh.predict(codec.model(), clean.x[0]);
  const auto targets = codec_assignments(codec.model(), {clean.target[0]});
  CHECK(q.indices.size() == targets.speech[0].size());
}

TEST_CASE("snapshots compare bitwise") {
  nn::Parameter p("p", nn::Tensor({2}, 1.0));
  nn::StateRegistry reg;
  reg.add(p);
  const auto a = snapshot_state(reg);
  CHECK(same_state(a, snapshot_state(reg)));
  p.value[1] = std::nextafter(1.0, 2.0);
  CHECK_FALSE(same_state(a, snapshot_state(reg)));
}
