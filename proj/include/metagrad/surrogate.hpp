#pragma once

#include "core.hpp"

namespace metagrad {

// Exp-concavity scale of the surrogate family: 1 for the full variant, 1/d
// for the diagonal one (each coordinate contributes an independent process).
inline double alpha(Variant variant, Eigen::Index d) {
    if (d < 1) throw std::invalid_argument("alpha: d must be >= 1");
    return variant == Variant::full ? 1.0 : 1.0 / static_cast<double>(d);
}

// Compressed form of the round's quadratic term M_t:
//   full: M = g g^T, stored as g itself (rank one, never materialized)
//   diag: M = diag(g .^ 2), stored as the squared entries
struct GradientOuterProduct {
    Variant variant = Variant::full;
    Vector data;

    static GradientOuterProduct from_gradient(const Vector& g, Variant variant) {
        if (variant == Variant::full) return {variant, g};
        return {variant, g.array().square().matrix()};
    }
};

// v^T M v without forming M.
inline double quadratic_form(const GradientOuterProduct& M, const Vector& v) {
    if (v.size() != M.data.size()) {
        throw std::invalid_argument("quadratic_form: dimension mismatch");
    }
    if (M.variant == Variant::full) {
        const double s = M.data.dot(v);
        return s * s;
    }
    return (v.array().square() * M.data.array()).sum();
}

// Surrogate loss of the round at learning rate eta, evaluated at u:
//   -eta (w_t - u)^T g_t + eta^2 (u - w_t)^T M_t (u - w_t).
// Zero at u = w_t by construction.
inline double surrogate_loss(double eta, const Vector& w_t, const Vector& g_t,
                             const Vector& u, Variant variant) {
    const GradientOuterProduct M = GradientOuterProduct::from_gradient(g_t, variant);
    const Vector diff = u - w_t;
    return eta * diff.dot(g_t) + eta * eta * quadratic_form(M, diff);
}

}  // namespace metagrad
