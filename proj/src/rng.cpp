#include "flipchance/rng.hpp"

#include <cmath>
#include <numbers>

namespace flipchance {

double Stream::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

std::uint64_t Stream::seed_of() const {
    // Fingerprint of the current engine state without advancing it.
    std::mt19937_64 copy = engine_;
    return copy() ^ (have_spare_ ? 0x5bd1e995ULL : 0ULL);
}

}  // namespace flipchance
