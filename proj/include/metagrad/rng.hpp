#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace metagrad {

// Names a deterministic random stream. Two streams with equal spec produce
// bitwise-identical draws, independent of the platform's <random> library.
struct RngSpec {
    std::string algorithm = "splitmix64";
    std::uint64_t seed = 0;
};

// SplitMix64: a 64-bit counter generator (Steele/Lea/Flood finalizer over a
// Weyl sequence). All randomness in the project flows through this class so
// that a run is a pure function of its seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    explicit Rng(const RngSpec& spec) : Rng(spec.seed) {
        if (spec.algorithm != "splitmix64") {
            throw std::invalid_argument("unknown rng algorithm: " + spec.algorithm);
        }
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1]; safe as a log() argument.
    double uniform01_positive() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Unbiased integer in {0, ..., n-1} by rejection.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    // Standard normal via Box-Muller; the sine mate of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01_positive();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline Eigen::VectorXd sample_normal_vector(Rng& rng, Eigen::Index d) {
    Eigen::VectorXd v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.normal();
    return v;
}

// Uniform on the unit sphere S^{d-1}: a normalized Gaussian vector.
inline Eigen::VectorXd sample_unit_sphere(Rng& rng, Eigen::Index d) {
    Eigen::VectorXd v = sample_normal_vector(rng, d);
    double n = v.norm();
    while (n == 0.0) {
        v = sample_normal_vector(rng, d);
        n = v.norm();
    }
    return v / n;
}

// Uniform in the closed ball of radius r.
inline Eigen::VectorXd sample_ball(Rng& rng, Eigen::Index d, double r) {
    const Eigen::VectorXd dir = sample_unit_sphere(rng, d);
    const double u = rng.uniform01_positive();
    return r * std::pow(u, 1.0 / static_cast<double>(d)) * dir;
}

inline Eigen::VectorXd sample_box(Rng& rng, const Eigen::VectorXd& lower,
                                  const Eigen::VectorXd& upper) {
    Eigen::VectorXd v(lower.size());
    for (Eigen::Index i = 0; i < lower.size(); ++i) v[i] = rng.uniform(lower[i], upper[i]);
    return v;
}

}  // namespace metagrad
