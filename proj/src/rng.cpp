#include "currmask/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "currmask/errors.hpp"

namespace currmask {

std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    if (n == 0) {
        throw ParameterError("uniform_index: empty range");
    }
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = rng();
    while (x >= limit) {
        x = rng();
    }
    return x % n;
}

std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
    if (probs.empty()) {
        throw ParameterError("sample_categorical: empty distribution");
    }
    double total = 0.0;
    for (double p : probs) {
        total += p;
    }
    const double u = uniform01(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) {
            return i;
        }
    }
    // u landed in the rounding slack above the last cumulative sum.
    for (std::size_t i = probs.size(); i-- > 0;) {
        if (probs[i] > 0.0) {
            return i;
        }
    }
    return probs.size() - 1;
}

double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    if (u1 <= 0.0) {
        u1 = 0x1.0p-53;
    }
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace currmask
