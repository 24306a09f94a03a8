#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "core.hpp"
#include "environments.hpp"
#include "metagrad.hpp"
#include "surrogate.hpp"

namespace metagrad {

// Running regret accounting against one fixed comparator u:
//   regret        sum f_t(w_t) - f_t(u)
//   lin_regret    sum <w_t - u, g_t>
//   variance      sum <u - w_t, g_t>^2            (full)
//                 per-coordinate sums (u_i - w_ti)^2 g_ti^2  (diag)
// plus the gradient statistics the bound evaluator needs.
class RegretLedger {
public:
    explicit RegretLedger(Vector u)
        : u_(std::move(u)),
          variance_coord_(Vector::Zero(u_.size())),
          grad_outer_sum_(Matrix::Zero(u_.size(), u_.size())) {}

    void record(const Vector& w, const Vector& g, const LossFunction& f) {
        if (w.size() != u_.size() || g.size() != u_.size()) {
            throw std::invalid_argument("RegretLedger::record: dimension mismatch");
        }
        const double fw = f.value(w);
        const double fu = f.value(u_);
        regret_ += fw - fu;
        cum_loss_ += fw;
        cum_loss_comparator_ += fu;
        const double ip = (w - u_).dot(g);
        lin_regret_ += ip;
        variance_full_ += ip * ip;
        variance_coord_.array() += (u_ - w).array().square() * g.array().square();
        grad_sq_sum_ += g.squaredNorm();
        grad_outer_sum_ += g * g.transpose();
        ++t_;
    }

    std::uint64_t rounds() const { return t_; }
    Eigen::Index dim() const { return u_.size(); }
    const Vector& comparator() const { return u_; }
    double regret() const { return regret_; }
    double lin_regret() const { return lin_regret_; }
    double cum_loss() const { return cum_loss_; }
    double cum_loss_comparator() const { return cum_loss_comparator_; }
    double variance_full() const { return variance_full_; }
    const Vector& variance_coord() const { return variance_coord_; }
    double variance(Variant v) const {
        return v == Variant::full ? variance_full_ : variance_coord_.sum();
    }
    double grad_sq_sum() const { return grad_sq_sum_; }
    const Matrix& grad_outer_sum() const { return grad_outer_sum_; }

private:
    Vector u_;
    std::uint64_t t_ = 0;
    double regret_ = 0.0;
    double lin_regret_ = 0.0;
    double cum_loss_ = 0.0;
    double cum_loss_comparator_ = 0.0;
    double variance_full_ = 0.0;
    Vector variance_coord_;
    double grad_sq_sum_ = 0.0;
    Matrix grad_outer_sum_;
};

// The two closed-form regret guarantees evaluated on a ledger, against the
// grid the learner was configured with. `bound` is the smaller of the two;
// the variance form is skipped (left +inf) when the relevant variance is
// zero, since its log term is undefined there.
struct BoundReport {
    double lin_regret = 0.0;
    double variance = 0.0;
    double c_t = 0.0;
    double xi = std::numeric_limits<double>::quiet_NaN();
    double bound_variance = std::numeric_limits<double>::infinity();
    double bound_gradient_sum = 0.0;
    double bound = 0.0;
    double slack = 0.0;
    bool variance_bound_skipped = false;
};

namespace detail {

// log det(I + c S) for symmetric positive semidefinite S via Cholesky.
inline double log_det_identity_plus(const Matrix& S, double c) {
    const Eigen::Index d = S.rows();
    Eigen::LLT<Matrix> llt(Matrix::Identity(d, d) + c * S);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error("log_det_identity_plus: factorization failed");
    }
    double ld = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) ld += std::log(llt.matrixL()(i, i));
    return 2.0 * ld;
}

inline Eigen::Index numerical_rank(const Matrix& S) {
    Eigen::JacobiSVD<Matrix> svd(S);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv[0] <= 0.0) return 0;
    const double tol = 1e-10 * sv[0];
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv[i] > tol) ++r;
    }
    return r;
}

}  // namespace detail

// Evaluate the learner's regret guarantee at the ledger's current round.
// With S_T the gradient outer-product sum, V the ledger variance for the
// variant, a = alpha(variant, d), and C_T = 4 ln(3 + log2(horizon)/2):
//   xi_full = min( log det(I + D^2 rk(S_T)/V S_T),  rk(S_T) ln(D^2/V sum|g|^2) )
//   xi_diag = sum_i ln(D^2 sum_t g_ti^2 / V_i)
//   bound_variance     = sqrt(8 V A) + 5 D G A,  A = |u|^2/D^2 + xi + C_T/a
//   bound_gradient_sum = sqrt(8 D^2 sum|g|^2 B) + 5 D G B,  B = |u|^2/D^2 + C_T/a
inline BoundReport theorem7_bound(const RegretLedger& ledger, const LearningRateGrid& grid,
                                  Variant variant) {
    const Eigen::Index d = ledger.dim();
    const double D = grid.D;
    const double G = grid.G;
    const double a = alpha(variant, d);
    const double u_norm_sq = ledger.comparator().squaredNorm();

    BoundReport rep;
    rep.lin_regret = ledger.lin_regret();
    rep.c_t = 4.0 * std::log(3.0 + 0.5 * std::log2(static_cast<double>(grid.horizon)));
    rep.variance = ledger.variance(variant);

    const double B = u_norm_sq / (D * D) + rep.c_t / a;
    rep.bound_gradient_sum = std::sqrt(8.0 * D * D * ledger.grad_sq_sum() * B) + 5.0 * D * G * B;

    bool skip = !(rep.variance > 0.0);
    if (variant == Variant::diag) {
        for (Eigen::Index i = 0; i < d; ++i) {
            if (!(ledger.variance_coord()[i] > 0.0)) skip = true;
        }
    }
    rep.variance_bound_skipped = skip;
    if (!skip) {
        double xi = 0.0;
        if (variant == Variant::full) {
            const Matrix& S = ledger.grad_outer_sum();
            const auto rk = static_cast<double>(detail::numerical_rank(S));
            const double xi_det = detail::log_det_identity_plus(S, D * D * rk / rep.variance);
            const double xi_rank = rk * std::log(D * D / rep.variance * ledger.grad_sq_sum());
            xi = std::min(xi_det, xi_rank);
        } else {
            for (Eigen::Index i = 0; i < d; ++i) {
                xi += std::log(D * D * ledger.grad_outer_sum()(i, i) / ledger.variance_coord()[i]);
            }
        }
        rep.xi = xi;
        const double A = u_norm_sq / (D * D) + xi + rep.c_t / a;
        rep.bound_variance = std::sqrt(8.0 * rep.variance * A) + 5.0 * D * G * A;
    }
    rep.bound = std::min(rep.bound_variance, rep.bound_gradient_sum);
    rep.slack = rep.bound - rep.lin_regret;
    return rep;
}

// Least-squares slope of log(regret) versus log(t) over rounds [t_lo, t_hi].
// regret_curve[t-1] holds the regret after round t. Rounds with nonpositive
// regret are dropped; nullopt if fewer than 10 usable points remain.
inline std::optional<double> slope_fit(const std::vector<double>& regret_curve,
                                       std::uint64_t t_lo, std::uint64_t t_hi) {
    if (regret_curve.empty() || t_lo < 1 || t_hi < t_lo) {
        throw std::invalid_argument("slope_fit: bad window");
    }
    t_hi = std::min<std::uint64_t>(t_hi, regret_curve.size());
    std::vector<double> xs, ys;
    for (std::uint64_t t = t_lo; t <= t_hi; ++t) {
        const double r = regret_curve[t - 1];
        if (r > 0.0) {
            xs.push_back(std::log(static_cast<double>(t)));
            ys.push_back(std::log(r));
        }
    }
    if (xs.size() < 10) return std::nullopt;
    const auto n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

// ---------------------------------------------------------------------------
// Fast-rate condition checkers
// ---------------------------------------------------------------------------

struct DirectionalCounterexample {
    Vector w;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct DirectionalCheckResult {
    bool holds = true;
    std::optional<DirectionalCounterexample> counterexample;
    std::uint64_t samples = 0;
};

// Sampled check of the curvature-toward-u condition
//   f(u) >= f(w) + a <u - w, df(w)> + b <u - w, df(w)>^2
// over losses drawn from the environment and w drawn uniformly from the
// domain, with slack 1e-9. Stops at the first counterexample.
inline DirectionalCheckResult directional_condition_check(Environment env, const Vector& u,
                                                          double a, double b, int n_samples,
                                                          std::uint64_t sampler_seed) {
    if (!env.domain().contains(u)) {
        throw std::invalid_argument("directional_condition_check: u outside the domain");
    }
    env.reset();
    Rng rng(sampler_seed);
    DirectionalCheckResult result;
    for (int k = 0; k < n_samples; ++k) {
        const LossFunction f = env.next_loss();
        const Vector w = env.domain().shape() == Domain::Shape::ball
                             ? sample_ball(rng, env.domain().dim(), env.domain().radius())
                             : sample_box(rng, env.domain().lower(), env.domain().upper());
        const Vector g = f.subgradient(w);
        const double ip = (u - w).dot(g);
        const double lhs = f.value(u);
        const double rhs = f.value(w) + a * ip + b * ip * ip;
        ++result.samples;
        if (lhs < rhs - 1e-9) {
            result.holds = false;
            result.counterexample = DirectionalCounterexample{w, lhs, rhs};
            return result;
        }
    }
    return result;
}

struct BernsteinPoint {
    Vector w;
    double lhs = 0.0;   // MC estimate of E <w-u*, df(w)>^2
    double rhs = 0.0;   // (<w-u*, E df(w)>)^beta
    double ratio = 0.0;
    bool skipped = false;
};

struct BernsteinEstimate {
    double B_hat = 0.0;
    std::vector<BernsteinPoint> points;
    int skipped = 0;
};

// Smallest B making the second-moment condition
//   E <w-u*, df(w)>^2 <= B (<w-u*, E df(w)>)^beta
// hold across the grid, with both expectations estimated from n_mc fresh
// losses per grid point. Points where the estimated right side is
// nonpositive are reported and skipped.
inline BernsteinEstimate bernstein_estimate(Environment env, const Vector& u_star, double beta,
                                            int n_mc, const std::vector<Vector>& w_grid) {
    if (n_mc < 1) throw std::invalid_argument("bernstein_estimate: n_mc must be positive");
    env.reset();
    BernsteinEstimate est;
    est.points.reserve(w_grid.size());
    for (const Vector& w : w_grid) {
        if ((w - u_star).norm() == 0.0) {
            throw std::invalid_argument("bernstein_estimate: w_grid must exclude u_star");
        }
        double sum_sq = 0.0;
        double sum_ip = 0.0;
        for (int k = 0; k < n_mc; ++k) {
            const LossFunction f = env.next_loss();
            const double ip = (w - u_star).dot(f.subgradient(w));
            sum_sq += ip * ip;
            sum_ip += ip;
        }
        BernsteinPoint pt;
        pt.w = w;
        pt.lhs = sum_sq / n_mc;
        const double mean_ip = sum_ip / n_mc;
        if (mean_ip <= 0.0) {
            pt.skipped = true;
            ++est.skipped;
        } else {
            pt.rhs = std::pow(mean_ip, beta);
            pt.ratio = pt.lhs / pt.rhs;
            est.B_hat = std::max(est.B_hat, pt.ratio);
        }
        est.points.push_back(std::move(pt));
    }
    return est;
}

struct ExpConcavityTuple {
    Eigen::Index d = 0;
    double eta = 0.0;
    double mc_mean = 0.0;
    double mc_se = 0.0;
    double rhs = 0.0;
    bool pass = true;
};

struct ExpConcavityResult {
    bool all_pass = true;
    std::vector<ExpConcavityTuple> tuples;
};

// Monte-Carlo check that Gaussian smoothing cannot beat the center point:
//   E_{u ~ N(mu, Sigma)} exp(-a l(u)) <= exp(-a l(mu)) + 3 SE
// over random admissible tuples (eta <= 1/(5DG), points in the unit ball,
// |g| <= 1; full: arbitrary PD Sigma, diag: diagonal Sigma), d <= 3.
inline ExpConcavityResult gaussian_exp_concavity_check(Variant variant, int n_tuples,
                                                       int n_samples, std::uint64_t seed) {
    Rng rng(seed);
    const double D = 2.0;  // unit-ball domain
    const double G = 1.0;
    ExpConcavityResult result;
    result.tuples.reserve(n_tuples);
    for (int k = 0; k < n_tuples; ++k) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.uniform_index(3));
        const double a = alpha(variant, d);
        const double eta = rng.uniform(1e-3, 1.0 / (5.0 * D * G));
        const Vector w_t = sample_ball(rng, d, 1.0);
        const Vector mu = sample_ball(rng, d, 1.0);
        const Vector g = sample_ball(rng, d, 1.0);

        // Covariance with eigenvalues in [0.05, 1]; full draws a random basis.
        Matrix L;
        if (variant == Variant::full) {
            Matrix Z(d, d);
            for (Eigen::Index i = 0; i < d; ++i) {
                for (Eigen::Index j = 0; j < d; ++j) Z(i, j) = rng.normal();
            }
            const Eigen::HouseholderQR<Matrix> qr(Z);
            const Matrix Q = qr.householderQ();
            Vector lam(d);
            for (Eigen::Index i = 0; i < d; ++i) lam[i] = rng.uniform(0.05, 1.0);
            L = Q * lam.array().sqrt().matrix().asDiagonal();
        } else {
            Vector lam(d);
            for (Eigen::Index i = 0; i < d; ++i) lam[i] = rng.uniform(0.05, 1.0);
            L = lam.array().sqrt().matrix().asDiagonal();
        }

        const double rhs = std::exp(-a * surrogate_loss(eta, w_t, g, mu, variant));
        double sum = 0.0, sum_sq = 0.0;
        for (int s = 0; s < n_samples; ++s) {
            const Vector u = mu + L * sample_normal_vector(rng, d);
            const double x = std::exp(-a * surrogate_loss(eta, w_t, g, u, variant));
            sum += x;
            sum_sq += x * x;
        }
        const double mean = sum / n_samples;
        const double var = std::max(0.0, sum_sq / n_samples - mean * mean);
        const double se = std::sqrt(var / n_samples);

        ExpConcavityTuple tup;
        tup.d = d;
        tup.eta = eta;
        tup.mc_mean = mean;
        tup.mc_se = se;
        tup.rhs = rhs;
        tup.pass = mean <= rhs + 3.0 * se;
        result.all_pass = result.all_pass && tup.pass;
        result.tuples.push_back(tup);
    }
    return result;
}

}  // namespace metagrad
