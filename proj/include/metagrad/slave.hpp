#pragma once

#include <Eigen/Dense>

#include "core.hpp"
#include "surrogate.hpp"

namespace metagrad {

class CovarianceNotPositiveDefinite : public std::runtime_error {
public:
    explicit CovarianceNotPositiveDefinite(const std::string& what)
        : std::runtime_error(what) {}
};

// One quadratic-process learner pinned to a single learning rate. The full
// variant maintains a dense covariance via rank-one downdates; the diagonal
// variant maintains d scalar variances.
struct SlaveState {
    double eta = 0.0;
    double D = 0.0;
    Variant variant = Variant::full;
    Vector w;         // current prediction, always inside the domain
    Matrix cov;       // full variant only
    Vector cov_diag;  // diag variant only
};

// Start at the origin with prior covariance D^2 I. The learning rate must lie
// in (0, 1/(5 D G)]; anything larger voids the master's telescoping argument.
inline SlaveState slave_init(double eta, const Bounds& bounds, Eigen::Index d) {
    if (d < 1) throw std::invalid_argument("slave_init: d must be >= 1");
    if (!(bounds.D > 0.0) || !(bounds.G > 0.0)) {
        throw std::invalid_argument("slave_init: bounds must be positive");
    }
    const double eta_max = 1.0 / (5.0 * bounds.D * bounds.G);
    if (!(eta > 0.0) || eta > eta_max) {
        std::ostringstream os;
        os << "slave_init: eta = " << eta << " outside (0, " << eta_max << "]";
        throw std::invalid_argument(os.str());
    }
    SlaveState s;
    s.eta = eta;
    s.D = bounds.D;
    s.variant = bounds.variant;
    s.w = Vector::Zero(d);
    if (bounds.variant == Variant::full) {
        s.cov = bounds.D * bounds.D * Matrix::Identity(d, d);
    } else {
        s.cov_diag = bounds.D * bounds.D * Vector::Ones(d);
    }
    return s;
}

namespace detail {

// Pull a point that is numerically a hair outside back through the boundary,
// so that Domain::contains holds exactly and re-projection is the identity.
inline Vector enforce_membership(const Domain& domain, Vector q) {
    if (domain.shape() == Domain::Shape::box) {
        return q.cwiseMax(domain.lower()).cwiseMin(domain.upper());
    }
    const double r = domain.radius();
    double n = q.norm();
    if (n > r) {
        q *= r / n;
        while (q.norm() > r) q *= (1.0 - 1e-16);
    }
    return q;
}

// Solve the ball-constrained projection in a basis where the metric is
// diagonal: minimize sum_i (u_i - p_i)^2 / sigma_i subject to |u| <= r.
// The KKT stationarity condition gives u_i(lam) = p_i / (1 + lam sigma_i);
// the multiplier solves phi(lam) = |u(lam)|^2 = r^2, with phi strictly
// decreasing on [0, inf). Safeguarded Newton, tolerance 1e-10 on the norm,
// at most 100 iterations.
inline Vector ball_project_diag_metric(const Vector& p, const Vector& sigma, double r) {
    const Eigen::Index d = p.size();
    const double pn = p.norm();
    if (pn <= r) return p;
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!(sigma[i] > 0.0)) {
            throw CovarianceNotPositiveDefinite("ball projection: nonpositive variance");
        }
    }
    const double sig_min = sigma.minCoeff();
    double lo = 0.0;
    double hi = (pn / r - 1.0) / sig_min;  // phi(hi) <= r^2 by construction
    double lam = hi / 2.0;
    auto eval = [&](double l, double& phi, double& dphi) {
        phi = 0.0;
        dphi = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            const double den = 1.0 + l * sigma[i];
            const double ui = p[i] / den;
            phi += ui * ui;
            dphi += -2.0 * sigma[i] * ui * ui / den;
        }
    };
    for (int it = 0; it < 100; ++it) {
        double phi, dphi;
        eval(lam, phi, dphi);
        const double err = std::sqrt(phi) - r;
        if (std::abs(err) <= 1e-10) break;
        if (phi > r * r) lo = lam; else hi = lam;
        double next = lam;
        if (dphi < 0.0) next = lam - (phi - r * r) / dphi;
        if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
        lam = next;
    }
    Vector u(d);
    for (Eigen::Index i = 0; i < d; ++i) u[i] = p[i] / (1.0 + lam * sigma[i]);
    return u;
}

}  // namespace detail

// Projection onto the domain in the Mahalanobis metric induced by a diagonal
// covariance: argmin_u (u - p)^T diag(cov)^{-1} (u - p). On a box the metric
// separates per coordinate, so this is plain clipping regardless of cov.
inline Vector mahalanobis_project(const Domain& domain, const Vector& cov_diag, const Vector& p) {
    if (p.size() != domain.dim() || cov_diag.size() != domain.dim()) {
        throw std::invalid_argument("mahalanobis_project: dimension mismatch");
    }
    for (Eigen::Index i = 0; i < cov_diag.size(); ++i) {
        if (!(cov_diag[i] > 0.0) || !std::isfinite(cov_diag[i])) {
            throw CovarianceNotPositiveDefinite("mahalanobis_project: diagonal covariance not positive definite");
        }
    }
    if (domain.contains(p)) return p;
    if (domain.shape() == Domain::Shape::box) {
        return p.cwiseMax(domain.lower()).cwiseMin(domain.upper());
    }
    return detail::enforce_membership(
        domain, detail::ball_project_diag_metric(p, cov_diag, domain.radius()));
}

// Full-covariance Mahalanobis projection. Ball domains reduce to the diagonal
// case in the covariance eigenbasis (the ball is rotation invariant); box
// domains run projected coordinate descent on the quadratic, tolerance 1e-10
// per sweep, at most 10 d^2 sweeps.
inline Vector mahalanobis_project(const Domain& domain, const Matrix& cov, const Vector& p) {
    const Eigen::Index d = domain.dim();
    if (p.size() != d || cov.rows() != d || cov.cols() != d) {
        throw std::invalid_argument("mahalanobis_project: dimension mismatch");
    }
    if (domain.contains(p)) return p;

    if (domain.shape() == Domain::Shape::ball) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
        if (es.info() != Eigen::Success || !(es.eigenvalues().minCoeff() > 0.0)) {
            throw CovarianceNotPositiveDefinite("mahalanobis_project: covariance not positive definite");
        }
        const Matrix& Q = es.eigenvectors();
        const Vector rotated = Q.transpose() * p;
        const Vector v = detail::ball_project_diag_metric(rotated, es.eigenvalues(), domain.radius());
        return detail::enforce_membership(domain, Q * v);
    }

    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw CovarianceNotPositiveDefinite("mahalanobis_project: covariance not positive definite");
    }
    const Matrix A = llt.solve(Matrix::Identity(d, d));  // the metric, cov^{-1}
    Vector u = p.cwiseMax(domain.lower()).cwiseMin(domain.upper());
    const long max_sweeps = 10 * static_cast<long>(d) * static_cast<long>(d);
    for (long sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_delta = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            // Minimize the quadratic over u_i alone, then clip to the box.
            const double cross = A.row(i).dot(u - p) - A(i, i) * (u[i] - p[i]);
            double ui = p[i] - cross / A(i, i);
            ui = std::min(std::max(ui, domain.lower()[i]), domain.upper()[i]);
            max_delta = std::max(max_delta, std::abs(ui - u[i]));
            u[i] = ui;
        }
        if (max_delta < 1e-10) break;
    }
    return u;
}

// One slave round. w_master is the point the gradient was taken at; the slave
// first tightens its covariance with the round's outer product, then takes a
// Newton-style step and projects back in its own metric:
//   cov'   = (cov^{-1} + 2 eta^2 M_t)^{-1}          (rank-one / per-coordinate)
//   wtilde = w - eta cov' g (1 + 2 eta g^T (w - w_master))
//   w'     = Mahalanobis projection of wtilde
inline void slave_step(SlaveState& state, const Vector& g, const Vector& w_master,
                       const Domain& domain) {
    const Eigen::Index d = state.w.size();
    if (g.size() != d || w_master.size() != d) {
        throw std::invalid_argument("slave_step: dimension mismatch");
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!std::isfinite(g[i])) throw std::invalid_argument("slave_step: nonfinite gradient");
    }
    const double eta = state.eta;

    if (state.variant == Variant::full) {
        const Vector Sg = state.cov * g;
        const double q = g.dot(Sg);
        const double denom = 1.0 + 2.0 * eta * eta * q;
        state.cov -= (2.0 * eta * eta / denom) * (Sg * Sg.transpose());
        state.cov = 0.5 * (state.cov + state.cov.transpose().eval());
        if (!(state.cov.diagonal().minCoeff() >= 1e-300)) {
            throw CovarianceNotPositiveDefinite("slave_step: covariance collapsed");
        }
        const double tilt = 1.0 + 2.0 * eta * g.dot(state.w - w_master);
        const Vector wtilde = state.w - eta * tilt * (state.cov * g);
        state.w = mahalanobis_project(domain, state.cov, wtilde);
        return;
    }

    Vector wtilde(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const double gi2 = g[i] * g[i];
        const double precision = 1.0 / state.cov_diag[i] + 2.0 * eta * eta * gi2;
        const double v = 1.0 / precision;
        if (!(v >= 1e-300)) {
            throw CovarianceNotPositiveDefinite("slave_step: variance collapsed");
        }
        state.cov_diag[i] = v;
        wtilde[i] = state.w[i] - v * (eta * g[i] + 2.0 * eta * eta * gi2 * (state.w[i] - w_master[i]));
    }
    state.w = mahalanobis_project(domain, state.cov_diag, wtilde);
}

}  // namespace metagrad
