#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "vqwave/nn/tape.hpp"

namespace vqwave::testing {

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kGradientTolerance = 1e-4;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

/// Compares analytic parameter gradients with central differences.
/// `loss(tape)` must record a scalar loss on the fresh tape it receives.
/// For parameters larger than `max_per_param`, a fixed random subset of
/// elements is checked. The per-parameter error is
/// ||g_analytic - g_numeric|| / max(||g_analytic||, ||g_numeric||, 1e-12).
inline GradCheckResult check_gradients(const std::vector<nn::Parameter*>& params,
                                       const std::function<nn::Var(nn::Tape&)>& loss,
                                       std::size_t max_per_param = 64, std::uint64_t seed = 7) {
  for (auto* p : params) {
    p->grad = nn::Tensor(p->value.shape(), 0.0);
  }
  {
    nn::Tape tape;
    nn::Var l = loss(tape);
    tape.backward(l);
  }
  auto eval = [&] {
    nn::Tape tape;
    return loss(tape).item();
  };
  std::mt19937_64 rng(seed);
  GradCheckResult result;
  for (auto* p : params) {
    std::vector<std::size_t> idx(p->value.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (idx.size() > max_per_param) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_per_param);
    }
    double diff2 = 0, a2 = 0, n2 = 0;
    for (std::size_t i : idx) {
      const double orig = p->value[i];
      p->value[i] = orig + kFiniteDifferenceStep;
      const double up = eval();
      p->value[i] = orig - kFiniteDifferenceStep;
      const double down = eval();
      p->value[i] = orig;
      const double num = (up - down) / (2 * kFiniteDifferenceStep);
      const double ana = p->grad[i];
      diff2 += (ana - num) * (ana - num);
      a2 += ana * ana;
      n2 += num * num;
    }
    const double rel = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    result.checked += idx.size();
    if (rel > result.max_relative_error || result.worst_parameter.empty()) {
      result.max_relative_error = std::max(rel, result.max_relative_error);
      if (rel >= result.max_relative_error) result.worst_parameter = p->name;
    }
  }
  return result;
}

inline nn::Tensor random_tensor(nn::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  nn::Tensor t(std::move(shape));
  std::normal_distribution<double> nd(0.0, scale);
  for (auto& v : t.values()) v = nd(rng);
  return t;
}

}  // namespace vqwave::testing
