#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "core.hpp"

namespace metagrad {

struct MasterEntry {
    double eta = 0.0;
    double prior = 0.0;
    double log_weight = 0.0;          // log of the current normalized weight
    double cumulative_surrogate = 0.0;
};

// Tilted exponentially weighted master over a grid of slaves. Weights live in
// log space and are renormalized every update, so the state never underflows
// even when cumulative surrogate losses drift far apart.
class MasterState {
public:
    MasterState(const std::vector<std::pair<double, double>>& eta_prior_pairs, double alpha)
        : alpha_(alpha) {
        if (eta_prior_pairs.empty()) throw std::invalid_argument("MasterState: empty grid");
        if (!(alpha > 0.0) || !std::isfinite(alpha)) {
            throw std::invalid_argument("MasterState: alpha must be positive");
        }
        double prior_sum = 0.0;
        double prev_eta = std::numeric_limits<double>::infinity();
        entries_.reserve(eta_prior_pairs.size());
        for (const auto& [eta, prior] : eta_prior_pairs) {
            if (!(eta > 0.0) || eta >= prev_eta) {
                throw std::invalid_argument("MasterState: etas must be positive and strictly decreasing");
            }
            if (!(prior > 0.0)) throw std::invalid_argument("MasterState: priors must be positive");
            prev_eta = eta;
            prior_sum += prior;
            entries_.push_back({eta, prior, std::log(prior), 0.0});
        }
        if (std::abs(prior_sum - 1.0) > 1e-9) {
            throw std::invalid_argument("MasterState: priors must sum to one");
        }
    }

    Eigen::Index size() const { return static_cast<Eigen::Index>(entries_.size()); }
    double alpha() const { return alpha_; }
    const std::vector<MasterEntry>& entries() const { return entries_; }

    // Normalized weights, strictly positive.
    Vector weights() const {
        const Eigen::Index n = size();
        double max_lw = -std::numeric_limits<double>::infinity();
        for (const auto& e : entries_) max_lw = std::max(max_lw, e.log_weight);
        Vector w(n);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            w[i] = std::exp(entries_[i].log_weight - max_lw);
            sum += w[i];
        }
        return w / sum;
    }

    // Master prediction: eta-tilted mixture of the slave points,
    //   sum_i pi_i eta_i p_i / sum_i pi_i eta_i.
    Vector tilted_average(const std::vector<Vector>& points) const {
        if (static_cast<Eigen::Index>(points.size()) != size()) {
            throw std::invalid_argument("tilted_average: one point per grid entry required");
        }
        const Vector w = weights();
        Vector num = Vector::Zero(points.front().size());
        double den = 0.0;
        for (Eigen::Index i = 0; i < size(); ++i) {
            const double c = w[i] * entries_[i].eta;
            num += c * points[i];
            den += c;
        }
        return num / den;
    }

    // Exponential-weights update on the round's surrogate losses (one per
    // entry): log pi_i += -alpha * loss_i, then renormalize in log space.
    void weight_update(const Vector& losses) {
        if (losses.size() != size()) {
            throw std::invalid_argument("weight_update: one loss per grid entry required");
        }
        for (Eigen::Index i = 0; i < losses.size(); ++i) {
            if (!std::isfinite(losses[i])) {
                throw std::invalid_argument("weight_update: nonfinite loss");
            }
        }
        double max_lw = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < size(); ++i) {
            entries_[i].log_weight -= alpha_ * losses[i];
            entries_[i].cumulative_surrogate += losses[i];
            max_lw = std::max(max_lw, entries_[i].log_weight);
        }
        double sum = 0.0;
        for (const auto& e : entries_) sum += std::exp(e.log_weight - max_lw);
        const double log_norm = max_lw + std::log(sum);
        for (auto& e : entries_) e.log_weight -= log_norm;
    }

    // Mixture potential sum_i prior_i exp(-alpha * cumulative_i): equals 1 on a
    // fresh state and never increases along a valid run.
    double potential() const {
        double phi = 0.0;
        for (const auto& e : entries_) {
            phi += std::exp(std::log(e.prior) - alpha_ * e.cumulative_surrogate);
        }
        return phi;
    }

private:
    std::vector<MasterEntry> entries_;
    double alpha_;
};

}  // namespace metagrad
