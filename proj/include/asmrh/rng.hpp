#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace asmrh {

// Deterministic random source. All sampling is built directly on
// mt19937_64 output words so that streams are reproducible bit-for-bit
// regardless of the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; second variate cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Normal(0, stddev) rejected outside +-2 stddev.
    double trunc_normal(double stddev) {
        while (true) {
            double z = normal();
            if (z >= -2.0 && z <= 2.0) return z * stddev;
        }
    }

    // Index in [0, n); modulo bias is irrelevant for n << 2^64 and the
    // result stays pinned to the engine stream.
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(eng_() % static_cast<std::uint64_t>(n));
    }

    // Fisher-Yates.
    template <typename V>
    void shuffle(std::vector<V>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace asmrh
