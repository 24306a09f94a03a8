#pragma once

#include <cstdint>
#include <vector>

#include "core.hpp"
#include "master.hpp"
#include "slave.hpp"
#include "surrogate.hpp"

namespace metagrad {

// ceil(log2(T) / 2) in exact integer arithmetic: the smallest k with 4^k >= T.
inline int half_log2_ceil(std::uint64_t T) {
    if (T < 1) throw std::invalid_argument("half_log2_ceil: T must be >= 1");
    int k = 0;
    unsigned __int128 p = 1;
    while (p < T) {
        p *= 4;
        ++k;
    }
    return k;
}

struct GridEntry {
    double eta = 0.0;
    double prior = 0.0;
};

struct LearningRateGrid {
    std::vector<GridEntry> entries;  // etas strictly decreasing
    double D = 0.0;
    double G = 0.0;
    std::uint64_t horizon = 0;
};

// Learning-rate grid for horizon T:
//   eta_i  = 2^{-i} / (5 D G),                  i = 0 .. ceil(log2(T)/2)
//   pi_i   = C / ((i+1)(i+2)),  C = 1 + 1/(1 + ceil(log2(T)/2))
// The priors telescope to exactly 1. eta_0 is the largest admissible rate and
// the smallest entry scales like 1/(5 D G sqrt(T)).
inline LearningRateGrid make_grid(double D, double G, std::uint64_t T) {
    if (!(D > 0.0) || !(G > 0.0) || !std::isfinite(D) || !std::isfinite(G)) {
        throw std::invalid_argument("make_grid: D and G must be positive and finite");
    }
    const int k = half_log2_ceil(T);
    const double C = 1.0 + 1.0 / (1.0 + static_cast<double>(k));
    const double base = 1.0 / (5.0 * D * G);
    LearningRateGrid grid;
    grid.D = D;
    grid.G = G;
    grid.horizon = T;
    grid.entries.reserve(static_cast<std::size_t>(k) + 1);
    for (int i = 0; i <= k; ++i) {
        GridEntry e;
        e.eta = std::ldexp(base, -i);  // exact halving of the base rate
        e.prior = C / (static_cast<double>(i + 1) * static_cast<double>(i + 2));
        grid.entries.push_back(e);
    }
    return grid;
}

// The composed learner: a grid of slaves, one per learning rate, under a
// tilted exponentially weighted master. Rounds proceed strictly as
//   predict:  w_t = tilted average of the current slave points
//   observe:  surrogate losses at the pre-update slave points ->
//             master weight update -> every slave steps on (g_t, w_t)
class MetaGradLearner {
public:
    MetaGradLearner(Variant variant, const Domain& domain, const Bounds& bounds, std::uint64_t T)
        : variant_(variant), domain_(domain), bounds_(bounds),
          grid_(make_grid(bounds.D, bounds.G, T)),
          master_(grid_pairs(grid_), alpha(variant, domain.dim())) {
        if (bounds.variant != variant) {
            throw std::invalid_argument("MetaGradLearner: bounds computed for a different variant");
        }
        slaves_.reserve(grid_.entries.size());
        for (const auto& e : grid_.entries) {
            slaves_.push_back(slave_init(e.eta, bounds_, domain_.dim()));
        }
    }

    Variant variant() const { return variant_; }
    const Domain& domain() const { return domain_; }
    const Bounds& bounds() const { return bounds_; }
    const LearningRateGrid& grid() const { return grid_; }
    const MasterState& master() const { return master_; }
    const std::vector<SlaveState>& slaves() const { return slaves_; }
    std::uint64_t rounds_observed() const { return t_; }

    Vector predict() const {
        std::vector<Vector> points;
        points.reserve(slaves_.size());
        for (const auto& s : slaves_) points.push_back(s.w);
        return master_.tilted_average(points);
    }

    void observe(const Vector& g) {
        const GradientBoundReport rep = check_gradient_bound(g, bounds_);
        if (!rep.ok) throw GradientBoundViolation(rep);
        const Vector w_t = predict();
        Vector losses(static_cast<Eigen::Index>(slaves_.size()));
        for (std::size_t i = 0; i < slaves_.size(); ++i) {
            losses[static_cast<Eigen::Index>(i)] =
                surrogate_loss(slaves_[i].eta, w_t, g, slaves_[i].w, variant_);
        }
        master_.weight_update(losses);
        for (auto& s : slaves_) slave_step(s, g, w_t, domain_);
        ++t_;
    }

private:
    static std::vector<std::pair<double, double>> grid_pairs(const LearningRateGrid& grid) {
        std::vector<std::pair<double, double>> pairs;
        pairs.reserve(grid.entries.size());
        for (const auto& e : grid.entries) pairs.emplace_back(e.eta, e.prior);
        return pairs;
    }

    Variant variant_;
    Domain domain_;
    Bounds bounds_;
    LearningRateGrid grid_;
    MasterState master_;
    std::vector<SlaveState> slaves_;
    std::uint64_t t_ = 0;
};

}  // namespace metagrad
