#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include "mate/errors.hpp"

namespace mate {

/// splitmix64 mix step; used to derive independent substream seeds so that
/// results do not depend on thread scheduling.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based seed split: substream `i` (optionally sub-substream `j`, `k`)
/// of a master seed.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t i,
                                std::uint64_t j = 0, std::uint64_t k = 0) {
    std::uint64_t s = mix64(master ^ 0x5851f42d4c957f2dULL);
    s = mix64(s ^ mix64(i));
    s = mix64(s ^ mix64(j ^ 0xda942042e4dd58b5ULL));
    s = mix64(s ^ mix64(k ^ 0x2545f4914f6cdd1dULL));
    return s;
}

/// Deterministic generator: mt19937_64 engine (bit-stable everywhere) with
/// hand-rolled samplers, so sequences do not depend on the standard library's
/// distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via the polar (Marsaglia) method.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    /// Gamma(shape, scale) via Marsaglia-Tsang, with the shape<1 boost.
    double gamma(double shape, double scale) {
        if (shape <= 0.0 || scale <= 0.0) throw ParameterError("gamma: shape and scale must be positive");
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
        }
    }

    /// Gamma(shape, scale) restricted to [lo, hi] by rejection.
    double truncated_gamma(double shape, double scale, double lo, double hi) {
        if (!(lo < hi)) throw ParameterError("truncated_gamma: need lo < hi");
        for (int attempt = 0; attempt < 100000; ++attempt) {
            const double x = gamma(shape, scale);
            if (x >= lo && x <= hi) return x;
        }
        throw ParameterError("truncated_gamma: acceptance region has negligible mass");
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace mate
