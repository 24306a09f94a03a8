#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "core.hpp"
#include "rng.hpp"

namespace metagrad {

// A seeded loss stream over a fixed domain. Equal (name, params, RngSpec)
// yields a bitwise-identical stream; reset() rewinds to round one.
class Environment {
public:
    using Sampler = std::function<LossFunction(std::uint64_t t, Rng& rng)>;

    Environment(std::string name, Domain domain, double G, std::optional<Vector> u_star,
                RngSpec spec, Sampler sampler)
        : name_(std::move(name)), domain_(std::move(domain)), G_(G),
          u_star_(std::move(u_star)), spec_(std::move(spec)), rng_(spec_),
          sampler_(std::move(sampler)) {
        if (!(G_ > 0.0)) throw std::invalid_argument("Environment: G must be positive");
        if (u_star_ && !domain_.contains(*u_star_)) {
            throw std::invalid_argument("Environment: u_star outside the domain");
        }
    }

    const std::string& name() const { return name_; }
    const Domain& domain() const { return domain_; }
    double gradient_bound() const { return G_; }
    const std::optional<Vector>& u_star() const { return u_star_; }
    const RngSpec& rng_spec() const { return spec_; }
    std::uint64_t round() const { return t_; }

    LossFunction next_loss() { return sampler_(++t_, rng_); }

    void reset() {
        rng_ = Rng(spec_);
        t_ = 0;
    }

private:
    std::string name_;
    Domain domain_;
    double G_;
    std::optional<Vector> u_star_;
    RngSpec spec_;
    Rng rng_;
    std::uint64_t t_ = 0;
    Sampler sampler_;
};

namespace detail {

// |u - c| on the line, with the zero-slope subgradient at the kink.
inline LossFunction absolute_loss(double c) {
    LossFunction f;
    f.value = [c](const Vector& u) { return std::abs(u[0] - c); };
    f.subgradient = [c](const Vector& u) {
        Vector g(1);
        const double z = u[0] - c;
        g[0] = z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0);
        return g;
    };
    return f;
}

}  // namespace detail

// f_t(u) = |u - 1/4| on U = [-1, 1], every round. The minimizer 1/4 is the
// natural comparator.
inline Environment fixed_absolute(std::uint64_t seed = 0) {
    Vector lo(1), hi(1), ustar(1);
    lo[0] = -1.0;
    hi[0] = 1.0;
    ustar[0] = 0.25;
    return Environment(
        "fixed_absolute", Domain::box(lo, hi), 1.0, ustar, RngSpec{"splitmix64", seed},
        [](std::uint64_t, Rng&) { return detail::absolute_loss(0.25); });
}

// f_t(u) = |u - x_t| on U = [-1, 1] with x_t = +1/2 w.p. p_plus, else -1/2,
// i.i.d. The population minimizer is the majority point.
inline Environment stochastic_absolute(double p_plus, std::uint64_t seed) {
    if (!(p_plus > 0.0) || !(p_plus < 1.0)) {
        throw std::invalid_argument("stochastic_absolute: p_plus must lie in (0, 1)");
    }
    Vector lo(1), hi(1), ustar(1);
    lo[0] = -1.0;
    hi[0] = 1.0;
    ustar[0] = p_plus >= 0.5 ? 0.5 : -0.5;
    return Environment(
        "stochastic_absolute", Domain::box(lo, hi), 1.0, ustar, RngSpec{"splitmix64", seed},
        [p_plus](std::uint64_t, Rng& rng) {
            const double x = rng.uniform01() < p_plus ? 0.5 : -0.5;
            return detail::absolute_loss(x);
        });
}

// Hinge loss on the unit ball against noiseless labels from a fixed direction:
// X_t uniform on the sphere, Y_t = sign(<u_bar, X_t>) with sign(0) = +1,
// f_t(u) = max(0, 1 - Y_t <u, X_t>). Subgradient 0 at margins >= 1.
inline Environment hinge_sphere(Eigen::Index d, Vector u_bar, std::uint64_t seed) {
    if (d < 1) throw std::invalid_argument("hinge_sphere: d must be >= 1");
    if (u_bar.size() != d) throw std::invalid_argument("hinge_sphere: u_bar dimension mismatch");
    if (!(u_bar.norm() > 0.0)) throw std::invalid_argument("hinge_sphere: u_bar must be nonzero");
    if (u_bar.norm() > 1.0) throw std::invalid_argument("hinge_sphere: u_bar outside the unit ball");
    return Environment(
        "hinge_sphere", Domain::ball(1.0, d), 1.0, u_bar, RngSpec{"splitmix64", seed},
        [u_bar, d](std::uint64_t, Rng& rng) {
            Vector x = sample_unit_sphere(rng, d);
            // Rounding can leave the sample one ulp outside the unit ball,
            // which would break the declared gradient bound G = 1.
            while (x.norm() > 1.0) x *= (1.0 - 1e-16);
            const double s = u_bar.dot(x);
            const double y = s >= 0.0 ? 1.0 : -1.0;
            LossFunction f;
            f.value = [x, y](const Vector& u) { return std::max(0.0, 1.0 - y * x.dot(u)); };
            f.subgradient = [x, y, d](const Vector& u) {
                if (1.0 - y * x.dot(u) > 0.0) return Vector(-y * x);
                return Vector(Vector::Zero(d));
            };
            return f;
        });
}

namespace detail {

inline Environment make_scripted(std::string name, Domain domain, double G,
                                 std::vector<Vector> gradients, std::uint64_t seed) {
    if (gradients.empty()) throw std::invalid_argument("scripted: empty gradient list");
    Vector total = Vector::Zero(domain.dim());
    for (const auto& g : gradients) {
        if (g.size() != domain.dim()) throw std::invalid_argument("scripted: gradient dimension mismatch");
        if (g.norm() > G + 1e-12) throw std::invalid_argument("scripted: gradient exceeds bound G");
        total += g;
    }
    // argmin over U of <total, u>: the extreme point against the summed script.
    Vector ustar = Vector::Zero(domain.dim());
    if (domain.shape() == Domain::Shape::ball) {
        const double n = total.norm();
        // Projecting pins the rescaled point inside the ball even when the
        // norm computation rounds one ulp above the radius.
        if (n > 0.0) ustar = euclidean_project(domain, -domain.radius() / n * total);
    } else {
        for (Eigen::Index i = 0; i < domain.dim(); ++i) {
            if (total[i] > 0.0) ustar[i] = domain.lower()[i];
            else if (total[i] < 0.0) ustar[i] = domain.upper()[i];
        }
    }
    auto grads = std::make_shared<std::vector<Vector>>(std::move(gradients));
    return Environment(
        std::move(name), std::move(domain), G, ustar, RngSpec{"splitmix64", seed},
        [grads](std::uint64_t t, Rng&) {
            if (t > grads->size()) throw std::out_of_range("scripted: script exhausted");
            const Vector g = (*grads)[t - 1];
            LossFunction f;
            f.value = [g](const Vector& u) { return g.dot(u); };
            f.subgradient = [g](const Vector&) { return g; };
            return f;
        });
}

}  // namespace detail

// Deterministic linear losses f_t(u) = <g_t, u> from a fixed script. The
// comparator is the exact best-in-hindsight point for the full script.
inline Environment scripted(Domain domain, double G, std::vector<Vector> gradients,
                            std::uint64_t seed = 0) {
    return detail::make_scripted("scripted", std::move(domain), G, std::move(gradients), seed);
}

// Scripted linear losses with gradients drawn uniformly from the unit ball
// (so both the norm and every coordinate stay within G = 1) on U = ball(1).
// The script is a pure function of (d, T, seed).
inline Environment scripted_random(Eigen::Index d, std::uint64_t T, std::uint64_t seed) {
    if (T < 1) throw std::invalid_argument("scripted_random: T must be >= 1");
    Rng rng(seed);
    std::vector<Vector> grads;
    grads.reserve(T);
    for (std::uint64_t t = 0; t < T; ++t) {
        Vector g = sample_ball(rng, d, 1.0);
        while (g.norm() > 1.0) g *= (1.0 - 1e-16);
        grads.push_back(std::move(g));
    }
    return detail::make_scripted("scripted_random", Domain::ball(1.0, d), 1.0,
                                 std::move(grads), seed);
}

}  // namespace metagrad
