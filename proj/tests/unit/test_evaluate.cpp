#include <cmath>
#include <random>

#include "doctest.h"
#include "vqwave/data/mixing.hpp"
#include "vqwave/data/synthetic.hpp"
#include "vqwave/train/evaluate.hpp"

using namespace vqwave;
using namespace vqwave::train;

namespace {

EvalItem item(double snr_db, std::uint64_t seed, bool with_reference = true) {
  std::mt19937_64 rng(seed);
  const auto s = data::synthetic_speech(0.2, rng);
  const auto n = data::synthetic_noise(data::SyntheticNoise::White, 0.2, rng);
  const auto m = data::mix_at_snr({s, n, std::nullopt, snr_db, false});
  EvalItem it{"clip" + std::to_string(seed), m.x, std::nullopt, snr_db};
  if (with_reference) it.reference = m.target;
  return it;
}

}  // namespace

TEST_CASE("bucket assignment") {
  const std::vector<double> centres{2.5, 7.5, 12.5, 17.5};
  CHECK(bucket_index(7.5, centres) == 1);
  CHECK(bucket_index(2.0, centres) == 0);
  CHECK(bucket_index(17.9, centres) == 3);
  CHECK(bucket_index(25.0, centres) == -1);
  CHECK(bucket_index(-3.0, centres) == -1);
}

TEST_CASE("untrained model scores near ln 256 in every bucket; pass-through of the reference is infinite") {
  CodecModel model(ModelConfig::tiny(), 4);
  std::vector<EvalItem> items;
  for (int b = 0; b < 4; ++b) items.push_back(item(2.5 + 5.0 * b, 10 + b));
  items.push_back(item(7.5, 20, false));
  items.push_back(item(40.0, 21));
  const auto report = evaluate_objective(model, items);
  REQUIRE(report.buckets.size() == 4);
  CHECK(report.warnings.size() == 2);
  for (const auto& b : report.buckets) {
    CHECK(b.count == 1);
    CHECK(std::abs(b.ce - std::log(256.0)) < 0.7);
    CHECK(std::isfinite(b.segsnr_output));
    CHECK(b.perplexity >= 1.0);
  }
  CHECK(report.table().find("7.5") != std::string::npos);

  std::vector<EvalItem> oracle;
  for (auto it : items) {
    if (!it.reference || it.snr_db > 20) continue;
    it.noisy = *it.reference;
    oracle.push_back(it);
  }
  EvalOptions opts;
  opts.estimator = Estimator::Passthrough;
  const auto pass = evaluate_objective(model, oracle, opts);
  for (const auto& b : pass.buckets) {
    CHECK(std::isinf(b.segsnr_output));
    CHECK(b.segsnr_output > 0);
  }
}
