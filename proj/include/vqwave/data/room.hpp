#pragma once

#include <array>
#include <vector>

namespace vqwave::data {

using Vec3 = std::array<double, 3>;

/// Shoebox room with one source and one microphone.
struct RoomSpec {
  Vec3 dimensions{5.0, 4.0, 3.0};  // metres
  Vec3 source{1.0, 1.0, 1.5};
  Vec3 mic{3.0, 2.5, 1.5};
  double reflection_coefficient = 0.7;  // wall amplitude factor, [0, 1)
  int max_order = 10;                   // highest total reflection count, <= 20
  double speed_of_sound = 343.0;

  /// Throws InvalidInput for non-positive sizes, positions on or outside the
  /// walls, out-of-range coefficients/orders, or coincident source and mic.
  void validate() const;
};

inline constexpr int kMaxReflectionOrder = 20;

/// Image-source impulse response. Each mirror source with total reflection
/// count k <= max_order contributes beta^k / (4 pi d) at sample round(d / c * fs);
/// contributions landing on the same sample add. The result has length
/// (largest delay + 1) and keeps the physical 1/(4 pi d) scale.
std::vector<double> image_source_rir(const RoomSpec& room, int sample_rate);

/// Same response with the direct path moved to sample 0 and scaled to 1, so
/// convolving keeps the dry signal's level and timing.
std::vector<double> normalized_rir(const RoomSpec& room, int sample_rate);

double distance(const Vec3& a, const Vec3& b);

}  // namespace vqwave::data
