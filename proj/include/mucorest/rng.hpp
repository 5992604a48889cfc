#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace mucorest {

// Seeded generator with distribution helpers written out by hand, so the
// sequence for a given seed does not depend on the standard library vendor.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform in [0, n); n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    // Uniform in [lo, hi], inclusive on both ends.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo);
        if (span == std::numeric_limits<std::uint64_t>::max()) {
            return static_cast<std::int64_t>(engine_());
        }
        return static_cast<std::int64_t>(static_cast<std::uint64_t>(lo) + uniform_index(span + 1));
    }

    double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool coin() { return (engine_() >> 63) != 0; }

private:
    std::mt19937_64 engine_;
};

}  // namespace mucorest
