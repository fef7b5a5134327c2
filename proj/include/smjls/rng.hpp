#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace smjls {

/// SplitMix64 mixing step; used to derive independent per-path / per-run
/// seeds from a single base seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(splitmix64(base) + index);
}

/// Deterministic random stream. All draws are derived from mt19937_64
/// (bit-exact across platforms per the standard); distributions are
/// implemented by explicit inversion so that sequences are reproducible
/// independently of the standard library in use.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53-bit resolution.
    double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1]; safe as a log argument.
    double next_positive() { return 1.0 - next_double(); }

    /// Uniform on (0, 1): the zero draw is clamped away so that inverse-CDF
    /// sampling of laws supported on (0, T] never returns the endpoint 0.
    double next_unit_open() { return std::max(next_double(), 0x1.0p-53); }

    /// Standard normal via Box-Muller (pair cached).
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u = next_positive();
        const double v = next_double();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double a = 2.0 * M_PI * v;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace smjls
