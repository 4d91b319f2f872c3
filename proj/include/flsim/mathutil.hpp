#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace flsim {

inline constexpr double kLn2 = 0.6931471805599453;
inline constexpr double kLn2Pi = 1.8378770664093453;

// Numerically stable logistic sigmoid.
inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Inverse of sigmoid on (0, 1).
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// softplus(x) = log(1 + e^x) without overflow for large |x|.
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double softplus_grad(double x) { return sigmoid(x); }

// log(1 - tanh(x)^2) in a form that stays finite for large |x|.
inline double log_one_minus_tanh_sq(double x) {
  return 2.0 * (kLn2 - x - softplus(-2.0 * x));
}

inline double sq(double x) { return x * x; }

// FNV-1a, used for config hashing and child-seed derivation.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace flsim
