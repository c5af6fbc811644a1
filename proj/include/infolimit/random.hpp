#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace infolimit {

std::uint64_t splitmix64(std::uint64_t x);

/// Stream key for substream `index` of a run seeded with `seed`. Streams
/// depend only on (seed, index), never on scheduling.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index);

/// Variates on top of mt19937_64. The std distributions are not reproducible
/// across standard-library implementations, so the transforms live here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer uniform on [lo, hi].
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(uniform() * static_cast<double>(hi - lo + 1));
    }

    /// Standard normal (Box-Muller, pairs cached).
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double t = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace infolimit
