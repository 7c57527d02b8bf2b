#pragma once

#include <algorithm>
#include <cstdint>
#include <random>

#include "raceline/common.hpp"
#include "raceline/normal.hpp"

namespace raceline {

// Deterministic RNG used everywhere randomness is needed. Draws go through
// the inverse CDF so a stream of uniforms fully determines every sample.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(splitmix64(seed)) {}

    // strictly inside (0, 1)
    double uniform() {
        uint64_t bits = eng_() >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    double normal(double mean, double sd) { return mean + sd * inv_norm_cdf(uniform()); }

    // Normal(mean, sd) truncated to [0, inf), exact inverse-CDF draw.
    // sd == 0 degenerates to the clamped mean.
    double truncated_normal_nonneg(double mean, double sd) {
        if (sd <= 0.0) return std::max(mean, 0.0);
        double survival = norm_cdf(mean / sd);  // P(raw draw >= 0)
        double tail = survival * (1.0 - uniform());
        if (tail <= 0.0) return 0.0;  // survival underflowed, mass sits at the bound
        return std::max(0.0, mean - sd * inv_norm_cdf(tail));
    }

    uint64_t bits() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

}  // namespace raceline
