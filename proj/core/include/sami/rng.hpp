#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sami {

// One random stream per purpose (env resets, actor noise, buffer sampling, ...)
// so that enabling or disabling a component never shifts the draws seen by the
// others. Streams are derived from the run seed plus a purpose label.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  // Uniform integer in [0, n).
  std::uint64_t integer(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& raw() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t fnv1a64(std::string_view s);
std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent stream seed from (run_seed, purpose label).
std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view purpose);

inline RngStream derive_stream(std::uint64_t run_seed, std::string_view purpose) {
  return RngStream(derive_seed(run_seed, purpose));
}

}  // namespace sami
