#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "flsim/mathutil.hpp"

namespace flsim {

// Seeded random stream with deterministic child derivation.
//
// One master seed per run; each component (channel draws, policy noise,
// buffer sampling, ...) works on its own child stream so that refactoring
// one consumer does not shift the draws seen by another. Gaussian variates
// use Box-Muller on top of the raw engine instead of std::normal_distribution,
// whose output is implementation-defined; this keeps runs bit-reproducible.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  RngStream child(std::string_view tag) const {
    return RngStream(splitmix64(seed_ ^ fnv1a64(tag)));
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Inclusive integer range.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1u;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]; keeps log() finite
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.141592653589793 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace flsim
