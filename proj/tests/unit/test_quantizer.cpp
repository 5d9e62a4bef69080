#include <cmath>
#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "vqwave/error.hpp"
#include "vqwave/quantizer.hpp"

using namespace vqwave;
using vqwave::testing::brute_force_nearest;
using vqwave::testing::check_gradients;
using vqwave::testing::kGradientTolerance;
using vqwave::testing::random_tensor;

namespace {

Codebook make_codebook(int k, int d, double decay, std::mt19937_64& rng) {
  return Codebook("cb", k, d, decay, 1e-5, rng);
}

}  // namespace

TEST_CASE("nearest code: inspection cases, ties, fixed points") {
  std::mt19937_64 rng(1);
  Codebook cb = make_codebook(2, 64, 0.99, rng);
  nn::Tensor codes = nn::Tensor::matrix(2, 64);
  codes.at(1, 0) = 1.0;
  codes.at(1, 1) = 1.0;
  cb.set_codes(codes);
  std::vector<double> e(64, 0.0);
  e[0] = 0.2;
  e[1] = 0.1;
  CHECK(quantize_nearest(e, cb).first == 0);
  e[0] = e[1] = 0.5;  // equidistant: lowest index wins
  CHECK(quantize_nearest(e, cb).first == 0);

  Codebook big = make_codebook(512, 64, 0.99, rng);
  const auto [idx, dist] = quantize_nearest(big.codes.row(7), big);
  CHECK(idx == 7);
  CHECK(dist == 0.0);
  for (int k = 0; k < 512; ++k) CHECK(quantize_nearest(big.codes.row(k), big).first == k);
}

TEST_CASE("nearest code matches an exhaustive scan, never increases distance, and is scale invariant") {
  std::mt19937_64 rng(2);
  Codebook cb = make_codebook(512, 64, 0.99, rng);
  Codebook scaled = cb;
  nn::Tensor sc = cb.codes;
  for (auto& v : sc.values()) v *= 3.5;
  scaled.set_codes(sc);
  for (int i = 0; i < 1000; ++i) {
    const nn::Tensor e = random_tensor({64}, rng);
    const auto [j, d] = quantize_nearest(e.values(), cb);
    CHECK(j == brute_force_nearest(e.values(), cb.codes));
    double direct = 0;
    for (int c = 0; c < 64; ++c) direct += std::pow(e[c] - cb.codes.at(j, c), 2);
    CHECK(d == doctest::Approx(direct).epsilon(1e-12));
    nn::Tensor es = e;
    for (auto& v : es.values()) v *= 3.5;
    CHECK(quantize_nearest(es.values(), scaled).first == j);
  }
}

TEST_CASE("EMA update: hand example, degenerate decay and the count invariant") {
  std::mt19937_64 rng(3);
  Codebook cb = make_codebook(1, 64, 0.9, rng);
  const nn::Tensor c = random_tensor({1, 64}, rng);
  cb.set_codes(c);
  const nn::Tensor v = random_tensor({1, 64}, rng);
  const std::vector<int> assign{0};
  cb.ema_update(v, assign);
  for (int j = 0; j < 64; ++j) {
    CHECK(cb.codes.at(0, j) == doctest::Approx((0.9 * c.at(0, j) + 0.1 * v.at(0, j)) / (0.9 + 0.1)).epsilon(1e-14));
  }

  Codebook still = make_codebook(4, 3, 1.0, rng);
  const nn::Tensor before = still.codes;
  still.ema_update(nn::Tensor::matrix(0, 3), std::vector<int>{});
  CHECK(std::ranges::equal(still.codes.values(), before.values()));

  Codebook many = make_codebook(8, 4, 0.7, rng);
  many.set_codes(random_tensor({8, 4}, rng));
  std::uniform_int_distribution<int> pick(0, 1);  // codes 2..7 decay with nothing assigned
  for (int step = 0; step < 60; ++step) {
    const nn::Tensor x = random_tensor({5, 4}, rng);
    std::vector<int> a(5);
    for (auto& i : a) i = pick(rng);
    many.ema_update(x, a);
    for (int k = 0; k < 8; ++k) {
      for (int j = 0; j < 4; ++j) {
        CHECK(std::isfinite(many.codes.at(k, j)));
        CHECK(many.codes.at(k, j) * std::max(many.ema_count[k], 1e-5) ==
              doctest::Approx(many.ema_sum.at(k, j)).epsilon(1e-12));
      }
    }
  }
  CHECK_THROWS_AS(many.ema_update(nn::Tensor::matrix(1, 4), std::vector<int>{8}), Error);
}

TEST_CASE("EMA k-means recovers two well-separated cluster means") {
  std::mt19937_64 rng(4);
  const std::vector<std::vector<double>> centres{{2.0, -1.0, 0.5}, {-3.0, 2.0, 1.0}};
  Codebook cb = make_codebook(2, 3, 0.9, rng);
  nn::Tensor init = nn::Tensor::matrix(2, 3);
  for (int j = 0; j < 3; ++j) init.at(0, j) = centres[0][j] + 0.8, init.at(1, j) = centres[1][j] - 0.8;
  cb.set_codes(init);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (int step = 0; step < 400; ++step) {
    nn::Tensor x = nn::Tensor::matrix(200, 3);
    std::vector<int> a(200);
    for (int i = 0; i < 200; ++i) {
      for (int j = 0; j < 3; ++j) x.at(i, j) = centres[i % 2][j] + noise(rng);
      a[i] = quantize_nearest(x.row(i), cb).first;
    }
    cb.ema_update(x, a);
  }
  for (int k = 0; k < 2; ++k) {
    for (int j = 0; j < 3; ++j) CHECK(std::abs(cb.codes.at(k, j) - centres[k][j]) < 1e-2);
  }
}

TEST_CASE("commitment loss value and gradient") {
  nn::Tape t;
  nn::Tensor e = nn::Tensor::matrix(1, 64);
  e.at(0, 0) = 1.0;
  CHECK(vq_loss(t.constant(e), nn::Tensor::matrix(1, 64), 0.25).value()[0] == 0.25);
  CHECK(vq_loss(t.constant(e), e, 0.25).value()[0] == 0.0);

  std::mt19937_64 rng(5);
  nn::Parameter ep("e", random_tensor({6, 4}, rng));
  const nn::Tensor eh = random_tensor({6, 4}, rng);
  ep.grad = nn::Tensor(ep.value.shape(), 0.0);
  nn::Tape t2;
  t2.backward(vq_loss(t2.param(ep), eh, 0.25));
  for (std::size_t i = 0; i < eh.size(); ++i) {
    CHECK(ep.grad[i] == doctest::Approx(2 * 0.25 * (ep.value[i] - eh[i]) / 6).epsilon(1e-12));
  }
  auto r = check_gradients({&ep}, [&](nn::Tape& tt) { return vq_loss(tt.param(ep), eh, 0.25); });
  CHECK(r.max_relative_error <= kGradientTolerance);
}

TEST_CASE("codebook perplexity") {
  CHECK(codebook_perplexity(std::vector<int>(10, 3)) == doctest::Approx(1.0));
  std::vector<int> all(512);
  for (int i = 0; i < 512; ++i) all[i] = i;
  CHECK(codebook_perplexity(all) == doctest::Approx(512.0).epsilon(1e-12));
  // Histogram {0: 2, 1: 1, 2: 1}: H = -(0.5 ln 0.5 + 2 * 0.25 ln 0.25).
  const double h = -(0.5 * std::log(0.5) + 0.5 * std::log(0.25));
  CHECK(codebook_perplexity(std::vector<int>{0, 1, 0, 2}) == doctest::Approx(std::exp(h)).epsilon(1e-12));
}

TEST_CASE("projection head: zero weights give the bias, output size, straight-through value and gradient check") {
  std::mt19937_64 rng(6);
  QuantizerConfig cfg;
  QuantizerHead head("h", 12, cfg, rng);
  CHECK(head.projection.weight.value.cols() == 64);
  QuantizerHead zero = head;
  for (auto& v : zero.projection.weight.value.values()) v = 0.0;
  nn::Tape t;
  const nn::Tensor x = random_tensor({5, 12}, rng);
  const nn::Var p = zero.project(t, t.constant(x));
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 64; ++c) CHECK(p.value().at(r, c) == zero.projection.bias.value[c]);
  }

  const auto out = head.forward(t, t.constant(x), nn::Mode::Train, &rng, 0.25);
  CHECK(std::ranges::equal(out.quantized.value().values(), out.codes.values()));
  for (int r = 0; r < 5; ++r) {
    CHECK(out.indices[r] == brute_force_nearest(out.projected.value().row(r), head.codebook.codes));
  }

  nn::Parameter xp("x", x);
  const nn::Tensor proj = random_tensor({5, 64}, rng);
  auto r = check_gradients({&xp, &head.projection.weight, &head.projection.bias}, [&](nn::Tape& tt) {
    return nn::sum(nn::mul(head.project(tt, tt.param(xp)), tt.constant(proj)));
  });
  CHECK(r.max_relative_error <= kGradientTolerance);
}

TEST_CASE("codebook initialisation draws rows from the batch") {
  std::mt19937_64 rng(7);
  Codebook cb = make_codebook(4, 3, 0.99, rng);
  CHECK_FALSE(cb.initialized());
  const nn::Tensor batch = random_tensor({10, 3}, rng);
  cb.initialize_from(batch, rng);
  CHECK(cb.initialized());
  std::set<int> rows;
  for (int k = 0; k < 4; ++k) {
    int found = -1;
    for (int r = 0; r < 10; ++r) {
      bool same = true;
      for (int j = 0; j < 3; ++j) same = same && cb.codes.at(k, j) == batch.at(r, j);
      if (same) found = r;
    }
    CHECK(found >= 0);
    rows.insert(found);
    CHECK(cb.ema_count[k] == 1.0);
  }
  CHECK(rows.size() == 4);
}
