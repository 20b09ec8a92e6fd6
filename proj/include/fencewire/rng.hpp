#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

namespace fencewire {

// Deterministic random source. mt19937_64 has a fully specified output
// sequence, and we derive doubles from it ourselves instead of going through
// std::*_distribution (whose draw counts are implementation-defined), so a
// (seed, call sequence) pair reproduces bit-identical values everywhere.
class DetRng {
 public:
  explicit DetRng(std::uint64_t seed) : eng_(seed) {}

  // Uniform on [0, 1), 53 bits of mantissa.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Zero-mean gaussian via Box-Muller; the second variate of each pair is
  // cached so consecutive calls cost one transform per two draws.
  double gaussian(double sigma) {
    if (spare_) {
      double z = *spare_;
      spare_.reset();
      return z * sigma;
    }
    double u1 = 1.0 - uniform01();  // (0, 1] keeps log() finite
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    return r * std::cos(a) * sigma;
  }

  std::uint64_t next_u64() { return eng_(); }

  // Stable seed derivation for named sub-streams (one per sensor node).
  static std::uint64_t derive(std::uint64_t base, std::string_view tag) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
    for (unsigned char c : tag) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return splitmix64(base ^ h);
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 eng_;
  std::optional<double> spare_;
};

}  // namespace fencewire
