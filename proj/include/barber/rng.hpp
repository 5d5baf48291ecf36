#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace barber {

// Deterministic RNG wrapper. mt19937_64 has a standard-mandated output
// sequence, and the double mappings below avoid the implementation-defined
// std::*_distribution classes, so streams are identical across platforms.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform in (0, 1), never exactly 0 or 1
    double next_unit() {
        return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
    }

    // uniform integer in [0, n)
    int next_below(int n) {
        int v = static_cast<int>(next_unit() * static_cast<double>(n));
        return v >= n ? n - 1 : v;
    }

    // standard normal via Box-Muller (cosine branch only)
    double next_gaussian() {
        const double u1 = next_unit();
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

  private:
    std::mt19937_64 gen_;
};

} // namespace barber
