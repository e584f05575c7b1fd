#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace percot::detail {

// Seeded Gaussian sampler (Box-Muller over mt19937_64) so parameter init does
// not depend on the standard library's normal_distribution algorithm.
class GaussianRng {
 public:
  explicit GaussianRng(std::uint64_t seed) : engine_(seed) {}

  double normal(double stddev) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_ * stddev;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle) * stddev;
  }

  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace percot::detail
