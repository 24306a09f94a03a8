#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "core.hpp"
#include "slave.hpp"

namespace metagrad {

// ---------------------------------------------------------------------------
// Online gradient descent
// ---------------------------------------------------------------------------

struct OgdMode {
    enum class Kind { general, strongly_convex };
    Kind kind = Kind::general;
    double mu = 0.0;

    static OgdMode general() { return {}; }
    static OgdMode strongly_convex(double mu) {
        if (!(mu > 0.0)) throw std::invalid_argument("OgdMode: mu must be positive");
        return {Kind::strongly_convex, mu};
    }
};

struct OgdState {
    Vector w;
    std::uint64_t t = 0;  // rounds already taken
    double D = 0.0;
    double G = 0.0;
    OgdMode mode;
};

inline OgdState ogd_init(const Bounds& bounds, Eigen::Index d, OgdMode mode = OgdMode::general()) {
    if (d < 1) throw std::invalid_argument("ogd_init: d must be >= 1");
    if (!(bounds.D > 0.0) || !(bounds.G > 0.0)) {
        throw std::invalid_argument("ogd_init: bounds must be positive");
    }
    return OgdState{Vector::Zero(d), 0, bounds.D, bounds.G, mode};
}

// Step t uses rate D/(G sqrt(t)) in general mode, 1/(mu t) under strong
// convexity, followed by Euclidean projection.
inline void ogd_step(OgdState& state, const Vector& g, const Domain& domain) {
    if (g.size() != state.w.size()) throw std::invalid_argument("ogd_step: dimension mismatch");
    const auto t = static_cast<double>(state.t + 1);
    const double eta = state.mode.kind == OgdMode::Kind::general
                           ? state.D / (state.G * std::sqrt(t))
                           : 1.0 / (state.mode.mu * t);
    state.w = euclidean_project(domain, state.w - eta * g);
    ++state.t;
}

class OgdLearner {
public:
    OgdLearner(const Domain& domain, const Bounds& bounds, OgdMode mode = OgdMode::general())
        : domain_(domain), state_(ogd_init(bounds, domain.dim(), mode)) {}
    Vector predict() const { return state_.w; }
    void observe(const Vector& g) { ogd_step(state_, g, domain_); }
    const OgdState& state() const { return state_; }

private:
    Domain domain_;
    OgdState state_;
};

// ---------------------------------------------------------------------------
// Diagonal AdaGrad
// ---------------------------------------------------------------------------

struct AdaGradDiagState {
    Vector w;
    Vector accum;  // running sum of squared gradients per coordinate
    double step_scale = 0.0;
};

// step_scale defaults to the domain's D when constructed via AdaGradLearner.
inline AdaGradDiagState adagrad_diag_init(Eigen::Index d, double step_scale) {
    if (d < 1) throw std::invalid_argument("adagrad_diag_init: d must be >= 1");
    if (!(step_scale > 0.0)) throw std::invalid_argument("adagrad_diag_init: step_scale must be positive");
    return AdaGradDiagState{Vector::Zero(d), Vector::Zero(d), step_scale};
}

inline void adagrad_diag_step(AdaGradDiagState& state, const Vector& g, const Domain& domain) {
    if (g.size() != state.w.size()) throw std::invalid_argument("adagrad_diag_step: dimension mismatch");
    state.accum += g.array().square().matrix();
    for (Eigen::Index i = 0; i < state.w.size(); ++i) {
        state.w[i] -= state.step_scale * g[i] / std::sqrt(state.accum[i] + 1e-12);
    }
    state.w = euclidean_project(domain, state.w);
}

class AdaGradLearner {
public:
    AdaGradLearner(const Domain& domain, const Bounds& bounds)
        : domain_(domain), state_(adagrad_diag_init(domain.dim(), bounds.D)) {}
    AdaGradLearner(const Domain& domain, double step_scale)
        : domain_(domain), state_(adagrad_diag_init(domain.dim(), step_scale)) {}
    Vector predict() const { return state_.w; }
    void observe(const Vector& g) { adagrad_diag_step(state_, g, domain_); }
    const AdaGradDiagState& state() const { return state_; }

private:
    Domain domain_;
    AdaGradDiagState state_;
};

// ---------------------------------------------------------------------------
// Online Newton step
// ---------------------------------------------------------------------------

struct OnsState {
    Vector w;
    Matrix A;      // eps I + sum of gradient outer products
    Matrix A_inv;  // maintained by Sherman-Morrison alongside A
    double gamma = 0.0;
    double eps = 0.0;
};

// Defaults: eps = 1/D^2, gamma = min(1/(4 G D), 1) / 2.
inline OnsState ons_init(const Bounds& bounds, Eigen::Index d) {
    if (d < 1) throw std::invalid_argument("ons_init: d must be >= 1");
    if (!(bounds.D > 0.0) || !(bounds.G > 0.0)) {
        throw std::invalid_argument("ons_init: bounds must be positive");
    }
    const double eps = 1.0 / (bounds.D * bounds.D);
    const double gamma = 0.5 * std::min(1.0 / (4.0 * bounds.G * bounds.D), 1.0);
    OnsState s;
    s.w = Vector::Zero(d);
    s.A = eps * Matrix::Identity(d, d);
    s.A_inv = (1.0 / eps) * Matrix::Identity(d, d);
    s.gamma = gamma;
    s.eps = eps;
    return s;
}

inline OnsState ons_init(Eigen::Index d, double eps, double gamma) {
    if (d < 1) throw std::invalid_argument("ons_init: d must be >= 1");
    if (!(eps > 0.0) || !(gamma > 0.0)) throw std::invalid_argument("ons_init: eps and gamma must be positive");
    OnsState s;
    s.w = Vector::Zero(d);
    s.A = eps * Matrix::Identity(d, d);
    s.A_inv = (1.0 / eps) * Matrix::Identity(d, d);
    s.gamma = gamma;
    s.eps = eps;
    return s;
}

// A += g g^T (Sherman-Morrison on the inverse), then a Newton step projected
// in the metric A, i.e. a Mahalanobis projection with covariance A^{-1}.
inline void ons_step(OnsState& state, const Vector& g, const Domain& domain) {
    if (g.size() != state.w.size()) throw std::invalid_argument("ons_step: dimension mismatch");
    state.A += g * g.transpose();
    const Vector v = state.A_inv * g;
    state.A_inv -= (v * v.transpose()) / (1.0 + g.dot(v));
    state.A_inv = 0.5 * (state.A_inv + state.A_inv.transpose().eval());
    const Vector wtilde = state.w - (1.0 / state.gamma) * (state.A_inv * g);
    state.w = mahalanobis_project(domain, state.A_inv, wtilde);
}

class OnsLearner {
public:
    OnsLearner(const Domain& domain, const Bounds& bounds)
        : domain_(domain), state_(ons_init(bounds, domain.dim())) {}
    OnsLearner(const Domain& domain, double eps, double gamma)
        : domain_(domain), state_(ons_init(domain.dim(), eps, gamma)) {}
    Vector predict() const { return state_.w; }
    void observe(const Vector& g) { ons_step(state_, g, domain_); }
    const OnsState& state() const { return state_; }

private:
    Domain domain_;
    OnsState state_;
};

}  // namespace metagrad
