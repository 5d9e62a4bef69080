#include <cmath>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "vqwave/error.hpp"
#include "vqwave/nn/adam.hpp"
#include "vqwave/nn/checkpoint.hpp"
#include "vqwave/nn/layers.hpp"
#include "vqwave/nn/ops.hpp"

using namespace vqwave;
using namespace vqwave::nn;
using vqwave::testing::check_gradients;
using vqwave::testing::kGradientTolerance;
using vqwave::testing::random_tensor;

namespace {

// Reduces any output to a scalar through a fixed random projection so that
// every output element receives a distinct upstream gradient.
Var project(Tape& t, Var out, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return sum(mul(out, t.constant(random_tensor(out.shape(), rng))));
}

Parameter rand_param(const std::string& name, Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  return Parameter(name, random_tensor(std::move(shape), rng, scale));
}

// Direct "same"-padded convolution used as the forward oracle.
Tensor conv_reference(const Tensor& x, const Tensor& w, const Tensor& b, int batch, int k, int s) {
  const int len = static_cast<int>(x.rows()) / batch;
  const int cin = static_cast<int>(x.cols());
  const int cout = static_cast<int>(w.cols());
  const int out_len = (len + s - 1) / s;
  const int pad_total = std::max((out_len - 1) * s + k - len, 0);
  const int pad_left = pad_total / 2;
  Tensor y = Tensor::matrix(static_cast<std::int64_t>(batch) * out_len, cout);
  for (int bi = 0; bi < batch; ++bi)
    for (int t = 0; t < out_len; ++t)
      for (int o = 0; o < cout; ++o) {
        double acc = b[o];
        for (int kk = 0; kk < k; ++kk) {
          const int ti = t * s + kk - pad_left;
          if (ti < 0 || ti >= len) continue;
          for (int c = 0; c < cin; ++c) acc += x.at(bi * len + ti, c) * w.at(kk * cin + c, o);
        }
        y.at(bi * out_len + t, o) = acc;
      }
  return y;
}

}  // namespace

TEST_CASE("elementwise and reduction gradients") {
  std::mt19937_64 rng(1);
  auto a = rand_param("a", {3, 4}, rng);
  auto b = rand_param("b", {3, 4}, rng);
  auto r = check_gradients({&a, &b}, [&](Tape& t) {
    Var x = t.param(a), y = t.param(b);
    Var z = add(mul(tanh(x), sigmoid(y)), scale(sub(x, y), 0.3));
    return add(project(t, z), mean(mul(z, z)));
  });
  CHECK(r.max_relative_error <= kGradientTolerance);
}

TEST_CASE("dense and matmul gradients") {
  std::mt19937_64 rng(2);
  auto x = rand_param("x", {5, 3}, rng);
  auto w = rand_param("w", {3, 4}, rng);
  auto b = rand_param("b", {4}, rng);
  auto w2 = rand_param("w2", {4, 2}, rng);
  auto r = check_gradients({&x, &w, &b, &w2}, [&](Tape& t) {
    return project(t, matmul(relu(dense(t.param(x), t.param(w), t.param(b))), t.param(w2)));
  });
  CHECK(r.max_relative_error <= kGradientTolerance);

  Tape t;
  Var y = dense(t.constant(x.value), t.constant(w.value), t.constant(b.value));
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) {
      double acc = b.value[j];
      for (int k = 0; k < 3; ++k) acc += x.value.at(i, k) * w.value.at(k, j);
      CHECK(y.value().at(i, j) == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("shape op gradients") {
  std::mt19937_64 rng(3);
  auto a = rand_param("a", {6, 2}, rng);
  auto b = rand_param("b", {6, 3}, rng);
  auto c = rand_param("c", {2, 3}, rng);
  auto r = check_gradients({&a, &b, &c}, [&](Tape& t) {
    Var cat = concat_cols({t.param(a), t.param(b), repeat_rows(t.param(c), 3)});
    return add(project(t, cat), project(t, sequence_mean(cat, 2), 5));
  });
  CHECK(r.max_relative_error <= kGradientTolerance);

  Tape t;
  Var rep = repeat_rows(t.constant(c.value), 3);
  CHECK(rep.rows() == 6);
  CHECK(rep.value().at(2, 1) == c.value.at(0, 1));
  CHECK(rep.value().at(3, 2) == c.value.at(1, 2));
}

TEST_CASE("softmax cross-entropy value and gradient") {
  std::mt19937_64 rng(4);
  auto logits = rand_param("logits", {7, 5}, rng, 2.0);
  const std::vector<int> targets{0, 4, 2, 2, 1, 3, 0};
  auto r = check_gradients({&logits}, [&](Tape& t) { return softmax_cross_entropy(t.param(logits), targets); });
  CHECK(r.max_relative_error <= kGradientTolerance);

  Tape t;
  double expected = 0;
  for (int i = 0; i < 7; ++i) {
    double z = 0;
    for (int j = 0; j < 5; ++j) z += std::exp(logits.value.at(i, j));
    expected += std::log(z) - logits.value.at(i, targets[i]);
  }
  CHECK(softmax_cross_entropy(t.constant(logits.value), targets).item() == doctest::Approx(expected / 7).epsilon(1e-12));

  const std::vector<int> bad{0, 5, 0, 0, 0, 0, 0};
  CHECK_THROWS(softmax_cross_entropy(t.constant(logits.value), bad));

  // Uniform logits over 256 classes give ln 256.
  const std::vector<int> tgt(3, 17);
  CHECK(softmax_cross_entropy(t.constant(Tensor::matrix(3, 256, 0.5)), tgt).item() ==
        doctest::Approx(std::log(256.0)).epsilon(1e-12));
}

TEST_CASE("negative squared distance and mean squared distance") {
  std::mt19937_64 rng(5);
  auto x = rand_param("x", {4, 3}, rng);
  auto y = rand_param("y", {4, 3}, rng);
  Tensor codes = random_tensor({6, 3}, rng);
  auto r = check_gradients({&x, &y}, [&](Tape& t) {
    return add(project(t, negative_squared_distance(t.param(x), codes)), mean_squared_distance(t.param(x), t.param(y)));
  });
  CHECK(r.max_relative_error <= kGradientTolerance);

  Tape t;
  Var d = negative_squared_distance(t.constant(x.value), codes);
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 6; ++k) {
      double acc = 0;
      for (int j = 0; j < 3; ++j) acc += std::pow(x.value.at(i, j) - codes.at(k, j), 2);
      CHECK(d.value().at(i, k) == doctest::Approx(-acc).epsilon(1e-12));
    }
}

TEST_CASE("conv1d forward matches direct convolution and gradients check") {
  for (auto [k, s] : {std::pair{3, 1}, std::pair{4, 2}, std::pair{3, 2}, std::pair{1, 1}}) {
    CAPTURE(k);
    CAPTURE(s);
    std::mt19937_64 rng(10 + k * 3 + s);
    const int batch = 2, len = 7, cin = 3, cout = 4;
    auto x = rand_param("x", {batch * len, cin}, rng);
    auto w = rand_param("w", {k * cin, cout}, rng);
    auto b = rand_param("b", {cout}, rng);
    Tape t;
    Var y = conv1d(t.constant(x.value), t.constant(w.value), t.constant(b.value), batch, k, s);
    const Tensor ref = conv_reference(x.value, w.value, b.value, batch, k, s);
    REQUIRE(y.rows() == ref.rows());
    CHECK(y.rows() == batch * conv1d_output_length(len, s));
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.value()[i] == doctest::Approx(ref[i]).epsilon(1e-12));

    auto r = check_gradients({&x, &w, &b}, [&](Tape& tt) {
      return project(tt, conv1d(tt.param(x), tt.param(w), tt.param(b), batch, k, s));
    });
    CHECK(r.max_relative_error <= kGradientTolerance);
  }
}

TEST_CASE("batchnorm train statistics, eval path and gradients") {
  std::mt19937_64 rng(20);
  auto x = rand_param("x", {10, 3}, rng, 2.0);
  auto g = rand_param("g", {3}, rng);
  auto b = rand_param("b", {3}, rng);
  BatchNormStats stats{Tensor({3}, 0.0), Tensor({3}, 1.0)};
  auto r = check_gradients({&x, &g, &b}, [&](Tape& t) {
    return project(t, batchnorm(t.param(x), t.param(g), t.param(b), stats, Mode::Train));
  });
  CHECK(r.max_relative_error <= kGradientTolerance);

  BatchNormStats fresh{Tensor({3}, 0.0), Tensor({3}, 1.0)};
  Tape t;
  Var y = batchnorm(t.constant(x.value), t.constant(Tensor({3}, 1.0)), t.constant(Tensor({3}, 0.0)), fresh, Mode::Train);
  for (int c = 0; c < 3; ++c) {
    double m = 0, v = 0, ym = 0, yv = 0;
    for (int i = 0; i < 10; ++i) m += x.value.at(i, c) / 10;
    for (int i = 0; i < 10; ++i) v += std::pow(x.value.at(i, c) - m, 2);
    for (int i = 0; i < 10; ++i) ym += y.value().at(i, c) / 10;
    for (int i = 0; i < 10; ++i) yv += std::pow(y.value().at(i, c), 2) / 10;
    CHECK(ym == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(yv == doctest::Approx(v / 10 / (v / 10 + 1e-5)).epsilon(1e-9));
    CHECK(fresh.running_mean[c] == doctest::Approx(0.1 * m).epsilon(1e-12));
    CHECK(fresh.running_var[c] == doctest::Approx(0.9 + 0.1 * v / 9).epsilon(1e-12));
  }

  auto re = check_gradients({&x, &g, &b}, [&](Tape& tt) {
    return project(tt, batchnorm(tt.param(x), tt.param(g), tt.param(b), fresh, Mode::Eval));
  });
  CHECK(re.max_relative_error <= kGradientTolerance);
}

TEST_CASE("GRU recurrence matches the step form and gradients check") {
  std::mt19937_64 rng(30);
  const int batch = 2, frames = 3, hidden = 4, repeat = 3;
  auto gates = rand_param("gates", {batch * frames, 3 * hidden}, rng);
  auto whh = rand_param("w_hh", {hidden, 3 * hidden}, rng, 0.5);
  auto bhh = rand_param("b_hh", {3 * hidden}, rng, 0.5);
  auto prev_w = rand_param("prev", {5, 3 * hidden}, rng);
  Tensor h0 = random_tensor({batch, hidden}, rng, 0.5);

  RowLookupInput extra_template;
  std::uniform_int_distribution<int> pick(0, 4);
  std::normal_distribution<double> nd;
  for (int i = 0; i < batch * frames * repeat; ++i) {
    extra_template.index.push_back(pick(rng));
    extra_template.value.push_back(nd(rng));
  }

  auto r = check_gradients({&gates, &whh, &bhh, &prev_w}, [&](Tape& t) {
    RowLookupInput extra = extra_template;
    extra.weight = t.param(prev_w);
    return project(t, gru_recurrence(t.param(gates), t.param(whh), t.param(bhh), batch, repeat, &extra, &h0));
  });
  CHECK(r.max_relative_error <= kGradientTolerance);

  auto r1 = check_gradients({&gates, &whh, &bhh}, [&](Tape& t) {
    return project(t, gru_recurrence(t.param(gates), t.param(whh), t.param(bhh), batch));
  });
  CHECK(r1.max_relative_error <= kGradientTolerance);

  // Forward against explicit stepping.
  Tape t;
  RowLookupInput extra = extra_template;
  extra.weight = t.constant(prev_w.value);
  Var hs = gru_recurrence(t.constant(gates.value), t.constant(whh.value), t.constant(bhh.value), batch, repeat, &extra, &h0);
  for (int b = 0; b < batch; ++b) {
    std::vector<double> h(h0.row(b).begin(), h0.row(b).end());
    for (int s = 0; s < frames * repeat; ++s) {
      const int row = b * frames * repeat + s;
      std::vector<double> gx(3 * hidden);
      for (int j = 0; j < 3 * hidden; ++j) {
        gx[j] = gates.value.at(b * frames + s / repeat, j) +
                extra.value[row] * prev_w.value.at(extra.index[row], j);
      }
      gru_step(whh.value, bhh.value, gx, h);
      for (int j = 0; j < hidden; ++j) CHECK(hs.value().at(row, j) == doctest::Approx(h[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("GRU layer gradients") {
  std::mt19937_64 rng(31);
  Gru gru("gru", 3, 4, rng);
  auto x = rand_param("x", {2 * 5, 3}, rng);
  auto r = check_gradients({&x, &gru.w_ih, &gru.b_ih, &gru.w_hh, &gru.b_hh},
                           [&](Tape& t) { return project(t, gru.forward(t, t.param(x), 2)); });
  CHECK(r.max_relative_error <= kGradientTolerance);
}

TEST_CASE("straight-through composite: exact forward, identity backward") {
  std::mt19937_64 rng(40);
  auto e = rand_param("e", {4, 3}, rng);
  Tensor replacement = random_tensor({4, 3}, rng);
  Tape t;
  Var st = straight_through(t.param(e), replacement);
  for (std::size_t i = 0; i < replacement.size(); ++i) CHECK(st.value()[i] == replacement[i]);

  // Downstream of the replacement the gradient is evaluated at the replaced
  // value and passed through to e unchanged.
  Tape t2;
  e.grad = Tensor(e.value.shape(), 0.0);
  Var y = project(t2, tanh(straight_through(t2.param(e), replacement)));
  t2.backward(y);
  std::mt19937_64 prng(99);
  const Tensor proj = random_tensor({4, 3}, prng);
  for (std::size_t i = 0; i < replacement.size(); ++i) {
    const double th = std::tanh(replacement[i]);
    CHECK(e.grad[i] == doctest::Approx(proj[i] * (1 - th * th)).epsilon(1e-12));
  }

  // The composite is e + sg(q - e): the stop-gradient offset is a constant
  // fixed at the base point, so finite differences of e -> e + offset plus
  // the commitment term must match the backward pass.
  Tensor offset = replacement;
  for (std::size_t i = 0; i < offset.size(); ++i) offset[i] -= e.value[i];
  auto r = check_gradients({&e}, [&](Tape& tt) {
    Var ev = tt.param(e);
    Tensor q = e.value;
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += offset[i];
    return add(project(tt, tanh(straight_through(ev, q))),
               scale(mean_squared_distance(ev, tt.constant(replacement)), 0.25));
  });
  CHECK(r.max_relative_error <= kGradientTolerance);
}

TEST_CASE("stop_gradient blocks gradient flow") {
  Parameter p("p", Tensor({2}, std::vector<double>{1.0, 2.0}));
  p.grad = Tensor({2}, 0.0);
  Tape t;
  Var x = t.param(p);
  Var y = add(sum(mul(x, x)), sum(stop_gradient(mul(x, x))));
  t.backward(y);
  CHECK(p.grad[0] == 2.0);
  CHECK(p.grad[1] == 4.0);
}

TEST_CASE("backward with released intermediates gives the same gradients") {
  std::mt19937_64 rng(50);
  auto w = rand_param("w", {3, 3}, rng);
  auto x = rand_param("x", {4, 3}, rng);
  auto run = [&](bool release) {
    w.grad = Tensor(w.value.shape(), 0.0);
    Tape t;
    Var y = project(t, tanh(matmul(tanh(matmul(t.param(x), t.param(w))), t.param(w))));
    t.backward(y, BackwardOptions{release});
    return w.grad;
  };
  const Tensor a = run(false);
  const Tensor b = run(true);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("first_non_finite names the offending op") {
  Tape t;
  t.set_check_finite(false);
  Var a = t.constant(Tensor({2}, std::vector<double>{1.0, -1.0}));
  Var b = t.constant(Tensor({2}, std::vector<double>{0.0, 0.0}));
  Var ok = add(a, b);
  (void)ok;
  Var bad = scale(a, INFINITY);
  (void)bad;
  auto nf = t.first_non_finite();
  REQUIRE(nf.has_value());
  CHECK(nf->first == bad.id);
  CHECK(nf->second == "scale");
}

TEST_CASE("Adam matches the bias-corrected update") {
  Parameter p("p", Tensor({2}, std::vector<double>{0.5, -1.0}));
  AdamConfig cfg;
  cfg.lr = 0.1;
  Adam opt(cfg);
  std::vector<Parameter*> params{&p};
  double m0 = 0, v0 = 0, x0 = 0.5;
  for (int step = 1; step <= 3; ++step) {
    p.grad = Tensor({2}, std::vector<double>{2.0 * p.value[0], 1.0});
    const double g = 2.0 * x0;
    opt.step(params);
    m0 = 0.9 * m0 + 0.1 * g;
    v0 = 0.999 * v0 + 0.001 * g * g;
    const double mh = m0 / (1 - std::pow(0.9, step));
    const double vh = v0 / (1 - std::pow(0.999, step));
    x0 -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(p.value[0] == doctest::Approx(x0).epsilon(1e-12));
  }
  CHECK(opt.steps() == 3);

  Parameter q("q", Tensor({2}, std::vector<double>{1.0, 1.0}));
  q.grad = Tensor({2}, std::vector<double>{3.0, 4.0});
  AdamConfig zero;
  zero.lr = 0.0;
  Adam still(zero);
  std::vector<Parameter*> qs{&q};
  still.step(qs);
  CHECK(q.value[0] == 1.0);
  CHECK(q.value[1] == 1.0);
}

TEST_CASE("checkpoint round trip restores parameters, buffers and optimizer state") {
  std::mt19937_64 rng(60);
  Dense d("layer", 3, 2, rng);
  BatchNorm bn("bn", 2);
  bn.stats.running_mean[1] = 0.25;
  d.weight.adam_m = Tensor(d.weight.value.shape(), 0.5);
  d.weight.adam_v = Tensor(d.weight.value.shape(), 0.125);
  StateRegistry reg;
  d.register_state(reg);
  bn.register_state(reg);

  const auto ck = Checkpoint::capture(reg, "key = value\n", 17);
  const auto bytes = serialize_checkpoint(ck);
  const auto back = parse_checkpoint(bytes);
  CHECK(back.config_text == "key = value\n");
  CHECK(back.optimizer_step == 17);

  std::mt19937_64 rng2(61);
  Dense d2("layer", 3, 2, rng2);
  BatchNorm bn2("bn", 2);
  StateRegistry reg2;
  d2.register_state(reg2);
  bn2.register_state(reg2);
  back.restore(reg2);
  for (std::size_t i = 0; i < d.weight.value.size(); ++i) {
    CHECK(d2.weight.value[i] == d.weight.value[i]);
    CHECK(d2.weight.adam_m[i] == 0.5);
    CHECK(d2.weight.adam_v[i] == 0.125);
  }
  CHECK(bn2.stats.running_mean[1] == 0.25);

  Dense wrong("layer", 4, 2, rng2);
  StateRegistry reg3;
  wrong.register_state(reg3);
  bn2.register_state(reg3);
  CHECK_THROWS_AS(back.restore(reg3), vqwave::Error);

  auto corrupted = bytes;
  corrupted[0] = 'X';
  CHECK_THROWS(parse_checkpoint(corrupted));
}

TEST_CASE("GRU with zero weights halves the state every step") {
  const int hidden = 3, steps = 5;
  Tensor zeros_gates = Tensor::matrix(steps, 3 * hidden);
  Tensor w = Tensor::matrix(hidden, 3 * hidden);
  Tensor b({3 * hidden}, 0.0);
  Tensor h0 = Tensor::matrix(1, hidden);
  h0.at(0, 0) = 1.0;
  h0.at(0, 1) = -0.5;
  h0.at(0, 2) = 0.25;
  Tape t;
  Var hs = gru_recurrence(t.constant(zeros_gates), t.constant(w), t.constant(b), 1, 1, nullptr, &h0);
  for (int s = 0; s < steps; ++s) {
    for (int j = 0; j < hidden; ++j) {
      // z = sigmoid(0) = 0.5 and the candidate is tanh(0) = 0, so h_t = 0.5 h_{t-1}.
      CHECK(hs.value().at(s, j) == doctest::Approx(h0.at(0, j) * std::pow(0.5, s + 1)).epsilon(1e-15));
    }
  }
}

TEST_CASE("conv1d identity kernel and stride-2 length") {
  std::mt19937_64 rng(70);
  Tensor x = random_tensor({7, 2}, rng);
  Tensor w = Tensor::matrix(3 * 2, 2);
  w.at(1 * 2 + 0, 0) = 1.0;  // centre tap, channel 0 -> 0
  w.at(1 * 2 + 1, 1) = 1.0;
  Tape t;
  Var y = conv1d(t.constant(x), t.constant(w), t.constant(Tensor({2}, 0.0)), 1, 3, 1);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.value()[i] == x[i]);

  Tensor x100 = random_tensor({100, 1}, rng);
  Var y2 = conv1d(t.constant(x100), t.constant(random_tensor({4, 1}, rng)), t.constant(Tensor({1}, 0.0)), 1, 4, 2);
  CHECK(y2.value().rows() == 50);
}

TEST_CASE("batchnorm of a constant channel returns beta") {
  Tensor x = Tensor::matrix(6, 1);
  for (int i = 0; i < 6; ++i) x.at(i, 0) = 3.0;
  BatchNormStats stats{Tensor({1}, 0.0), Tensor({1}, 1.0)};
  Tape t;
  Var y = batchnorm(t.constant(x), t.constant(Tensor({1}, 2.0)), t.constant(Tensor({1}, 0.7)), stats, Mode::Train);
  for (int i = 0; i < 6; ++i) CHECK(y.value().at(i, 0) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("stop_gradient product rule leaves the frozen factor as the gradient") {
  std::mt19937_64 rng(71);
  auto x = rand_param("x", {5}, rng);
  x.grad = Tensor(x.value.shape(), 0.0);
  Tape t;
  Var xv = t.param(x);
  t.backward(sum(mul(xv, stop_gradient(xv))));
  for (std::size_t i = 0; i < x.value.size(); ++i) CHECK(x.grad[i] == doctest::Approx(x.value[i]).epsilon(1e-15));
}

TEST_CASE("two-branch graph gradient is the sum of both paths") {
  std::mt19937_64 rng(72);
  auto x = rand_param("x", {4}, rng);
  x.grad = Tensor(x.value.shape(), 0.0);
  Tape t;
  Var xv = t.param(x);
  // y = sum(tanh(x)) + sum(3 x^2): dy/dx = (1 - tanh^2) + 6x
  t.backward(add(sum(tanh(xv)), sum(scale(mul(xv, xv), 3.0))));
  for (std::size_t i = 0; i < x.value.size(); ++i) {
    const double th = std::tanh(x.value[i]);
    CHECK(x.grad[i] == doctest::Approx(1 - th * th + 6 * x.value[i]).epsilon(1e-12));
  }
}

TEST_CASE("Adam first step has magnitude lr at any gradient scale; zero gradient is a no-op") {
  for (double g : {1e-6, 1.0, 1e6}) {
    Parameter p("p", Tensor({1}, 0.0));
    p.grad = Tensor({1}, g);
    AdamConfig cfg;
    cfg.lr = 1e-3;
    Adam opt(cfg);
    std::vector<Parameter*> ps{&p};
    opt.step(ps);
    // m_hat = g, v_hat = g^2, step = lr * g / (|g| + eps)
    CHECK(p.value[0] == doctest::Approx(-1e-3 * g / (g + 1e-8)).epsilon(1e-12));
  }
  Parameter z("z", Tensor({2}, std::vector<double>{0.3, -0.2}));
  z.grad = Tensor({2}, 0.0);
  Adam opt(AdamConfig{});
  std::vector<Parameter*> zs{&z};
  for (int i = 0; i < 3; ++i) opt.step(zs);
  CHECK(z.value[0] == 0.3);
  CHECK(z.value[1] == -0.2);
}
