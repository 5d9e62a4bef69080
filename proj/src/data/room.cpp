#include "vqwave/data/room.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <string>

#include "vqwave/error.hpp"

namespace vqwave::data {

double distance(const Vec3& a, const Vec3& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

void RoomSpec::validate() const {
  for (int i = 0; i < 3; ++i) {
    if (!(dimensions[i] > 0.0)) throw invalid_input("room: dimensions must be positive");
    if (!(source[i] > 0.0 && source[i] < dimensions[i])) throw invalid_input("room: source must lie strictly inside the room");
    if (!(mic[i] > 0.0 && mic[i] < dimensions[i])) throw invalid_input("room: mic must lie strictly inside the room");
  }
  if (!(reflection_coefficient >= 0.0 && reflection_coefficient < 1.0)) {
    throw invalid_input("room: reflection coefficient must be in [0, 1)");
  }
  if (max_order < 0 || max_order > kMaxReflectionOrder) {
    throw invalid_input("room: max_order must be in [0, " + std::to_string(kMaxReflectionOrder) + "]");
  }
  if (!(speed_of_sound > 0.0)) throw invalid_input("room: speed of sound must be positive");
  if (distance(source, mic) == 0.0) throw invalid_input("room: source and mic coincide (zero distance)");
}

std::vector<double> image_source_rir(const RoomSpec& room, int sample_rate) {
  room.validate();
  if (sample_rate <= 0) throw invalid_input("room: sample rate must be positive");
  const int r = room.max_order;
  const double beta = room.reflection_coefficient;
  std::vector<double> h;
  auto add_tap = [&](std::size_t delay, double amp) {
    if (h.size() <= delay) h.resize(delay + 1, 0.0);
    h[delay] += amp;
  };

  // Per axis, image coordinate (1 - 2q) * s + 2 m L with |m - q| + |m| wall hits.
  for (int mx = -r; mx <= r; ++mx)
    for (int qx = 0; qx <= 1; ++qx) {
      const int kx = std::abs(mx - qx) + std::abs(mx);
      if (kx > r) continue;
      const double x = (1 - 2 * qx) * room.source[0] + 2.0 * mx * room.dimensions[0];
      for (int my = -r; my <= r; ++my)
        for (int qy = 0; qy <= 1; ++qy) {
          const int ky = std::abs(my - qy) + std::abs(my);
          if (kx + ky > r) continue;
          const double y = (1 - 2 * qy) * room.source[1] + 2.0 * my * room.dimensions[1];
          for (int mz = -r; mz <= r; ++mz)
            for (int qz = 0; qz <= 1; ++qz) {
              const int kz = std::abs(mz - qz) + std::abs(mz);
              const int order = kx + ky + kz;
              if (order > r) continue;
              const double z = (1 - 2 * qz) * room.source[2] + 2.0 * mz * room.dimensions[2];
              const double d = distance({x, y, z}, room.mic);
              const double amp = std::pow(beta, order) / (4.0 * std::numbers::pi * d);
              if (amp == 0.0) continue;
              const auto delay = static_cast<std::size_t>(std::lround(d / room.speed_of_sound * sample_rate));
              add_tap(delay, amp);
            }
        }
    }
  return h;
}

std::vector<double> normalized_rir(const RoomSpec& room, int sample_rate) {
  std::vector<double> h = image_source_rir(room, sample_rate);
  const double d = distance(room.source, room.mic);
  const auto direct = static_cast<std::size_t>(std::lround(d / room.speed_of_sound * sample_rate));
  const double scale = 4.0 * std::numbers::pi * d;
  std::vector<double> out(h.begin() + static_cast<std::ptrdiff_t>(direct), h.end());
  for (double& v : out) v *= scale;
  return out;
}

}  // namespace vqwave::data
