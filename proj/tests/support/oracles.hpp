#pragma once

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <vector>

#include "vqwave/data/room.hpp"

namespace vqwave::testing {

// Mirror-coordinate enumeration: along one axis of length L the images of a
// source at s sit at 2nL + s (|2n| wall reflections) and 2nL - s
// (|2n - 1| reflections).
inline std::map<long, double> mirror_oracle(const data::RoomSpec& room, int fs) {
  std::map<long, double> taps;
  const int r = room.max_order;
  struct Image {
    double pos;
    int reflections;
  };
  std::array<std::vector<Image>, 3> axis;
  for (int a = 0; a < 3; ++a) {
    for (int n = -r - 1; n <= r + 1; ++n) {
      const double l = room.dimensions[a], s = room.source[a];
      axis[a].push_back({2 * n * l + s, std::abs(2 * n)});
      axis[a].push_back({2 * n * l - s, std::abs(2 * n - 1)});
    }
  }
  for (const auto& ix : axis[0]) {
    for (const auto& iy : axis[1]) {
      for (const auto& iz : axis[2]) {
        const int order = ix.reflections + iy.reflections + iz.reflections;
        if (order > r) continue;
        const double d = std::sqrt(std::pow(ix.pos - room.mic[0], 2) + std::pow(iy.pos - room.mic[1], 2) +
                                   std::pow(iz.pos - room.mic[2], 2));
        const double amp = std::pow(room.reflection_coefficient, order) / (4 * std::numbers::pi * d);
        if (amp == 0.0) continue;
        taps[std::lround(d / room.speed_of_sound * fs)] += amp;
      }
    }
  }
  return taps;
}

// Exhaustive nearest-row scan; lowest index wins ties.
template <class Matrix>
int brute_force_nearest(std::span<const double> e, const Matrix& codes) {
  int best = 0;
  double best_d = INFINITY;
  for (std::int64_t k = 0; k < codes.rows(); ++k) {
    double d = 0;
    for (std::size_t j = 0; j < e.size(); ++j) d += (e[j] - codes.at(k, j)) * (e[j] - codes.at(k, j));
    if (d < best_d) best_d = d, best = static_cast<int>(k);
  }
  return best;
}

}  // namespace vqwave::testing
