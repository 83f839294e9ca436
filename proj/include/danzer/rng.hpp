#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace danzer {

/// splitmix64 finalizer; the single mixing primitive behind every stochastic
/// component, so that results are reproducible from (parameters, seed) alone.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Labeled sub-seed derivation: adding a new experiment label never perturbs
/// the streams of existing ones.
inline std::uint64_t sub_seed(std::uint64_t root, std::string_view label) {
    std::uint64_t h = 0xCBF29CE484222325ull; // FNV-1a
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return mix64(root ^ h);
}

/// Minimal counter-based generator. Unlike the std distributions its output
/// is pinned by this header, not by the standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return mix64(state_++); }

    /// Uniform in [0, 1).
    double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    /// Standard normal via Box-Muller.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        while (u == 0.0) u = u01();
        double v = u01();
        double r = std::sqrt(-2.0 * std::log(u));
        spare_ = r * std::sin(6.283185307179586476925286766559 * v);
        have_spare_ = true;
        return r * std::cos(6.283185307179586476925286766559 * v);
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace danzer
