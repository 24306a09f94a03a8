#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "rng.hpp"

namespace metagrad {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Which quadratic process the learner runs: one scalar process built on full
// gradient outer products, or d independent per-coordinate processes.
enum class Variant { full, diag };

inline const char* to_string(Variant v) {
    return v == Variant::full ? "full" : "diag";
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "full") return Variant::full;
    if (s == "diag") return Variant::diag;
    throw std::invalid_argument("unknown variant: " + s + " (expected full|diag)");
}

// Closed convex prediction domain: a Euclidean ball centered at the origin,
// or an axis-aligned box. Both must contain the origin, which is where every
// learner starts.
class Domain {
public:
    enum class Shape { ball, box };

    static Domain ball(double radius, Eigen::Index dim) {
        if (dim < 1) throw std::invalid_argument("Domain::ball: dim must be >= 1");
        if (!(radius > 0.0) || !std::isfinite(radius)) {
            throw std::invalid_argument("Domain::ball: radius must be positive and finite");
        }
        Domain d;
        d.shape_ = Shape::ball;
        d.dim_ = dim;
        d.radius_ = radius;
        return d;
    }

    static Domain box(Vector lower, Vector upper) {
        if (lower.size() != upper.size() || lower.size() < 1) {
            throw std::invalid_argument("Domain::box: bound vectors must have equal positive size");
        }
        for (Eigen::Index i = 0; i < lower.size(); ++i) {
            if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
                throw std::invalid_argument("Domain::box: need lower < upper per coordinate");
            }
            if (lower[i] > 0.0 || upper[i] < 0.0) {
                throw std::invalid_argument("Domain::box: box must contain the origin");
            }
        }
        Domain d;
        d.shape_ = Shape::box;
        d.dim_ = lower.size();
        d.lower_ = std::move(lower);
        d.upper_ = std::move(upper);
        return d;
    }

    Shape shape() const { return shape_; }
    Eigen::Index dim() const { return dim_; }

    double radius() const {
        if (shape_ != Shape::ball) throw std::logic_error("Domain::radius: not a ball");
        return radius_;
    }
    const Vector& lower() const {
        if (shape_ != Shape::box) throw std::logic_error("Domain::lower: not a box");
        return lower_;
    }
    const Vector& upper() const {
        if (shape_ != Shape::box) throw std::logic_error("Domain::upper: not a box");
        return upper_;
    }

    // Exact membership, no slack.
    bool contains(const Vector& p) const {
        if (p.size() != dim_) return false;
        if (shape_ == Shape::ball) return p.norm() <= radius_;
        for (Eigen::Index i = 0; i < dim_; ++i) {
            if (p[i] < lower_[i] || p[i] > upper_[i]) return false;
        }
        return true;
    }

private:
    Shape shape_ = Shape::ball;
    Eigen::Index dim_ = 0;
    double radius_ = 0.0;
    Vector lower_, upper_;
};

// Scale constants a learner is configured with. D bounds comparator-to-iterate
// distances and G bounds gradients; the meaning of both depends on the variant
// (Euclidean for full, per-coordinate for diag).
struct Bounds {
    double D = 0.0;
    double G = 0.0;
    Variant variant = Variant::full;
};

// One round's loss: value and a subgradient selector. Selectors used by the
// bundled environments return the zero-slope element at kinks.
struct LossFunction {
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> subgradient;
};

// Euclidean projection onto the domain. Idempotent: the returned point always
// passes Domain::contains exactly, so re-projection is the identity.
inline Vector euclidean_project(const Domain& domain, const Vector& p) {
    if (p.size() != domain.dim()) {
        throw std::invalid_argument("euclidean_project: dimension mismatch");
    }
    if (domain.shape() == Domain::Shape::box) {
        return p.cwiseMax(domain.lower()).cwiseMin(domain.upper());
    }
    const double r = domain.radius();
    double n = p.norm();
    if (n <= r) return p;
    Vector q = p * (r / n);
    // The rescale can land one ulp outside; nudge until membership is exact.
    while (q.norm() > r) q *= (1.0 - 1e-16);
    return q;
}

// Diameter/gradient scales implied by a domain for the given variant.
//   full: D = Euclidean diameter (2r for a ball, |upper-lower|_2 for a box)
//   diag: D = largest per-coordinate width
inline Bounds bounds_for(const Domain& domain, double G, Variant variant) {
    if (!(G > 0.0) || !std::isfinite(G)) {
        throw std::invalid_argument("bounds_for: G must be positive and finite");
    }
    double D = 0.0;
    if (domain.shape() == Domain::Shape::ball) {
        D = 2.0 * domain.radius();
    } else if (variant == Variant::full) {
        D = (domain.upper() - domain.lower()).norm();
    } else {
        D = (domain.upper() - domain.lower()).maxCoeff();
    }
    return Bounds{D, G, variant};
}

// Outcome of checking a gradient against Bounds. For the full variant the
// check is on the Euclidean norm (coordinate = -1); for diag it is
// per-coordinate and the first offender is named.
struct GradientBoundReport {
    bool ok = true;
    Eigen::Index coordinate = -1;
    double magnitude = 0.0;
    double limit = 0.0;

    std::string describe() const {
        std::ostringstream os;
        if (ok) {
            os << "gradient within bound " << limit;
        } else if (coordinate < 0) {
            os << "gradient norm " << magnitude << " exceeds bound " << limit;
        } else {
            os << "|g[" << coordinate << "]| = " << magnitude << " exceeds bound " << limit;
        }
        return os.str();
    }
};

inline GradientBoundReport check_gradient_bound(const Vector& g, const Bounds& bounds) {
    GradientBoundReport rep;
    rep.limit = bounds.G;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g[i])) {
            rep.ok = false;
            rep.coordinate = i;
            rep.magnitude = g[i];
            return rep;
        }
    }
    if (bounds.variant == Variant::full) {
        const double n = g.norm();
        if (n > bounds.G) {
            rep.ok = false;
            rep.coordinate = -1;
            rep.magnitude = n;
        }
        return rep;
    }
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        if (std::abs(g[i]) > bounds.G) {
            rep.ok = false;
            rep.coordinate = i;
            rep.magnitude = std::abs(g[i]);
            return rep;
        }
    }
    return rep;
}

class GradientBoundViolation : public std::runtime_error {
public:
    explicit GradientBoundViolation(GradientBoundReport rep)
        : std::runtime_error(rep.describe()), report(rep) {}
    GradientBoundReport report;
};

// First-order convexity witnessed on random pairs: f(v) >= f(w) + <v-w, df(w)>
// up to tol. Returns false on the first violated pair.
inline bool sampled_convexity_check(const LossFunction& loss, const Domain& domain,
                                    int pairs, Rng& rng, double tol = 1e-9) {
    for (int k = 0; k < pairs; ++k) {
        Vector w, v;
        if (domain.shape() == Domain::Shape::ball) {
            w = sample_ball(rng, domain.dim(), domain.radius());
            v = sample_ball(rng, domain.dim(), domain.radius());
        } else {
            w = sample_box(rng, domain.lower(), domain.upper());
            v = sample_box(rng, domain.lower(), domain.upper());
        }
        const Vector g = loss.subgradient(w);
        if (loss.value(v) < loss.value(w) + g.dot(v - w) - tol) return false;
    }
    return true;
}

}  // namespace metagrad
