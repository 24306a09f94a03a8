#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "baselines.hpp"
#include "core.hpp"
#include "environments.hpp"
#include "harness.hpp"
#include "metagrad.hpp"
#include "online.hpp"

namespace metagrad {

// Invalid run configuration: maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Comparator selection for regret accounting:
//   auto    environment's minimizer if it defines one, else best-in-hindsight
//   origin  the zero vector
//   best    always the best-in-hindsight post-pass
//   vector  explicit coordinates, comma separated
struct ComparatorSpec {
    enum class Kind { automatic, origin, best, explicit_vector };
    Kind kind = Kind::automatic;
    Vector vec;

    static ComparatorSpec parse(const std::string& s) {
        ComparatorSpec spec;
        if (s == "auto") return spec;
        if (s == "origin") {
            spec.kind = Kind::origin;
            return spec;
        }
        if (s == "best") {
            spec.kind = Kind::best;
            return spec;
        }
        std::vector<double> values;
        std::size_t pos = 0;
        while (pos <= s.size()) {
            const std::size_t comma = std::min(s.find(',', pos), s.size());
            const std::string tok = s.substr(pos, comma - pos);
            try {
                std::size_t used = 0;
                values.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw ConfigError("comparator: expected auto|origin|best|<v1,v2,...>, got '" + s + "'");
            }
            pos = comma + 1;
        }
        spec.kind = Kind::explicit_vector;
        spec.vec = Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
        return spec;
    }

    std::string to_string() const {
        switch (kind) {
            case Kind::automatic: return "auto";
            case Kind::origin: return "origin";
            case Kind::best: return "best";
            case Kind::explicit_vector: {
                std::string out;
                char buf[64];
                for (Eigen::Index i = 0; i < vec.size(); ++i) {
                    std::snprintf(buf, sizeof buf, "%.17g", vec[i]);
                    if (i) out += ',';
                    out += buf;
                }
                return out;
            }
        }
        return "auto";
    }
};

struct ExperimentConfig {
    std::string env;      // fixed_absolute | stochastic_absolute | hinge_sphere | scripted_random
    std::string learner;  // metagrad | ogd | adagrad | ons
    Variant variant = Variant::full;
    std::uint64_t T = 0;
    Eigen::Index d = 1;
    std::uint64_t seed = 0;
    ComparatorSpec comparator;
    std::string out;                      // artifact stem; empty writes nothing
    double p_plus = 0.6;                  // stochastic_absolute
    std::optional<Vector> u_bar;          // hinge_sphere; defaults to e_1
    std::optional<double> mu;             // ogd strongly-convex mode
    std::optional<double> step_scale;     // adagrad; defaults to D

    void validate() const {
        static const std::vector<std::string> envs = {"fixed_absolute", "stochastic_absolute",
                                                      "hinge_sphere", "scripted_random"};
        static const std::vector<std::string> learners = {"metagrad", "ogd", "adagrad", "ons"};
        if (std::find(envs.begin(), envs.end(), env) == envs.end()) {
            throw ConfigError("unknown env '" + env + "'");
        }
        if (std::find(learners.begin(), learners.end(), learner) == learners.end()) {
            throw ConfigError("unknown learner '" + learner + "'");
        }
        if (T < 1) throw ConfigError("T must be >= 1");
        if (d < 1) throw ConfigError("d must be >= 1");
        if ((env == "fixed_absolute" || env == "stochastic_absolute") && d != 1) {
            throw ConfigError(env + " is one-dimensional; got d = " + std::to_string(d));
        }
        if (!(p_plus > 0.0) || !(p_plus < 1.0)) throw ConfigError("p_plus must lie in (0, 1)");
        if (u_bar && env != "hinge_sphere") throw ConfigError("u_bar only applies to hinge_sphere");
        if (u_bar && u_bar->size() != d) throw ConfigError("u_bar must have length d");
        if (mu && learner != "ogd") throw ConfigError("mu only applies to ogd");
        if (mu && !(*mu > 0.0)) throw ConfigError("mu must be positive");
        if (step_scale && learner != "adagrad") throw ConfigError("step_scale only applies to adagrad");
        if (step_scale && !(*step_scale > 0.0)) throw ConfigError("step_scale must be positive");
    }

    nlohmann::json to_json() const {
        nlohmann::json j{
            {"env", env},     {"learner", learner},
            {"variant", std::string(metagrad::to_string(variant))},
            {"T", T},         {"d", d},
            {"seed", seed},   {"comparator", comparator.to_string()},
        };
        if (env == "stochastic_absolute") j["p_plus"] = p_plus;
        if (u_bar) j["u_bar"] = std::vector<double>(u_bar->data(), u_bar->data() + u_bar->size());
        if (mu) j["mu"] = *mu;
        if (step_scale) j["step_scale"] = *step_scale;
        if (!out.empty()) j["out"] = out;
        return j;
    }

    static ExperimentConfig from_json(const nlohmann::json& j) {
        static const std::vector<std::string> known = {"env",  "learner",    "variant", "T",
                                                       "d",    "seed",       "comparator", "out",
                                                       "p_plus", "u_bar",    "mu",      "step_scale"};
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
                throw ConfigError("unknown config key '" + it.key() + "'");
            }
        }
        ExperimentConfig cfg;
        try {
            cfg.env = j.at("env").get<std::string>();
            cfg.learner = j.at("learner").get<std::string>();
            cfg.T = j.at("T").get<std::uint64_t>();
            cfg.d = j.at("d").get<Eigen::Index>();
            cfg.seed = j.at("seed").get<std::uint64_t>();
            if (j.contains("variant")) cfg.variant = variant_from_string(j["variant"].get<std::string>());
            if (j.contains("comparator")) cfg.comparator = ComparatorSpec::parse(j["comparator"].get<std::string>());
            if (j.contains("out")) cfg.out = j["out"].get<std::string>();
            if (j.contains("p_plus")) cfg.p_plus = j["p_plus"].get<double>();
            if (j.contains("mu")) cfg.mu = j["mu"].get<double>();
            if (j.contains("step_scale")) cfg.step_scale = j["step_scale"].get<double>();
            if (j.contains("u_bar")) {
                const auto v = j["u_bar"].get<std::vector<double>>();
                cfg.u_bar = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
        cfg.validate();
        return cfg;
    }
};

inline Environment make_environment(const ExperimentConfig& cfg) {
    if (cfg.env == "fixed_absolute") return fixed_absolute(cfg.seed);
    if (cfg.env == "stochastic_absolute") return stochastic_absolute(cfg.p_plus, cfg.seed);
    if (cfg.env == "hinge_sphere") {
        Vector u_bar = cfg.u_bar.value_or([&] {
            Vector e1 = Vector::Zero(cfg.d);
            e1[0] = 1.0;
            return e1;
        }());
        return hinge_sphere(cfg.d, u_bar, cfg.seed);
    }
    if (cfg.env == "scripted_random") return scripted_random(cfg.d, cfg.T, cfg.seed);
    throw ConfigError("unknown env '" + cfg.env + "'");
}

inline std::unique_ptr<OnlineLearner> make_learner(const ExperimentConfig& cfg, const Domain& domain,
                                                   const Bounds& bounds) {
    if (cfg.learner == "metagrad") {
        return as_online_learner(MetaGradLearner(cfg.variant, domain, bounds, cfg.T),
                                 std::string("metagrad-") + to_string(cfg.variant));
    }
    if (cfg.learner == "ogd") {
        const OgdMode mode = cfg.mu ? OgdMode::strongly_convex(*cfg.mu) : OgdMode::general();
        return as_online_learner(OgdLearner(domain, bounds, mode), "ogd");
    }
    if (cfg.learner == "adagrad") {
        return as_online_learner(AdaGradLearner(domain, cfg.step_scale.value_or(bounds.D)), "adagrad");
    }
    if (cfg.learner == "ons") return as_online_learner(OnsLearner(domain, bounds), "ons");
    throw ConfigError("unknown learner '" + cfg.learner + "'");
}

// Cumulative loss minimizer over the recorded script: multi-stage grid
// refinement for d <= 2, projected subgradient descent (10^4 iterations on
// the mean loss, best iterate kept) for higher dimensions.
inline Vector best_in_hindsight(const Domain& domain, const std::vector<LossFunction>& losses,
                                double G) {
    const Eigen::Index d = domain.dim();
    auto total = [&](const Vector& v) {
        double s = 0.0;
        for (const auto& f : losses) s += f.value(v);
        return s;
    };

    if (d <= 2) {
        Vector lo(d), hi(d);
        if (domain.shape() == Domain::Shape::ball) {
            lo.setConstant(-domain.radius());
            hi.setConstant(domain.radius());
        } else {
            lo = domain.lower();
            hi = domain.upper();
        }
        Vector best = Vector::Zero(d);
        double best_val = total(best);
        Vector center = 0.5 * (lo + hi);
        double width = (hi - lo).maxCoeff();
        const int N = 41;
        for (int stage = 0; stage < 8; ++stage) {
            const double step = width / (N - 1);
            Vector p(d);
            if (d == 1) {
                for (int i = 0; i < N; ++i) {
                    p[0] = center[0] - width / 2 + i * step;
                    const Vector q = euclidean_project(domain, p);
                    const double v = total(q);
                    if (v < best_val) {
                        best_val = v;
                        best = q;
                    }
                }
            } else {
                for (int i = 0; i < N; ++i) {
                    for (int j = 0; j < N; ++j) {
                        p[0] = center[0] - width / 2 + i * step;
                        p[1] = center[1] - width / 2 + j * step;
                        const Vector q = euclidean_project(domain, p);
                        const double v = total(q);
                        if (v < best_val) {
                            best_val = v;
                            best = q;
                        }
                    }
                }
            }
            center = best;
            width = 4.0 * step;  // next stage covers +-2 cells around the best
        }
        return best;
    }

    const double scale = domain.shape() == Domain::Shape::ball
                             ? domain.radius()
                             : 0.5 * (domain.upper() - domain.lower()).norm();
    Vector v = Vector::Zero(d);
    Vector best = v;
    double best_val = total(v);
    const int iters = 10000;
    const auto n = static_cast<double>(losses.size());
    for (int k = 1; k <= iters; ++k) {
        Vector grad = Vector::Zero(d);
        double val = 0.0;
        for (const auto& f : losses) {
            val += f.value(v);
            grad += f.subgradient(v);
        }
        if (val < best_val) {
            best_val = val;
            best = v;
        }
        v = euclidean_project(domain, v - (scale / (G * n * std::sqrt(k))) * grad);
    }
    const double final_val = total(v);
    if (final_val < best_val) best = v;
    return best;
}

struct RoundRow {
    std::uint64_t t = 0;
    double loss = 0.0;
    double cum_loss = 0.0;
    double regret = 0.0;
    double lin_regret = 0.0;
    double variance = 0.0;
};

struct RunResult {
    ExperimentConfig config;
    Vector comparator;
    std::vector<RoundRow> rows;
    BoundReport bound;
    std::optional<double> slope;
    nlohmann::json summary;
    std::string csv_path;   // empty if nothing was written
    std::string json_path;
};

namespace detail {

inline std::string g17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_file_atomic(const std::string& path, const std::string& content) {
    const std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    const std::filesystem::path tmp = target.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os << content;
    }
    std::filesystem::rename(tmp, target);
}

}  // namespace detail

// Run one (environment, learner, horizon, seed) configuration end to end:
// simulate, resolve the comparator, account regret, evaluate the closed-form
// guarantee and the log-log slope, and (if `out` is set) write `<out>.csv`
// with schema t,loss,cum_loss,regret,lin_regret,variance and `<out>.json`.
inline RunResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    Environment env = make_environment(cfg);
    const Domain& domain = env.domain();
    const Variant variant = cfg.learner == "metagrad" ? cfg.variant : Variant::full;
    const Bounds bounds = bounds_for(domain, env.gradient_bound(), variant);
    std::unique_ptr<OnlineLearner> learner = make_learner(cfg, domain, bounds);

    std::vector<Vector> ws;
    std::vector<Vector> gs;
    std::vector<LossFunction> losses;
    ws.reserve(cfg.T);
    gs.reserve(cfg.T);
    losses.reserve(cfg.T);
    for (std::uint64_t t = 1; t <= cfg.T; ++t) {
        Vector w = learner->predict();
        LossFunction f = env.next_loss();
        Vector g = f.subgradient(w);
        learner->observe(g);  // checks the gradient bound and fails loudly
        ws.push_back(std::move(w));
        gs.push_back(std::move(g));
        losses.push_back(std::move(f));
    }

    Vector u;
    switch (cfg.comparator.kind) {
        case ComparatorSpec::Kind::origin:
            u = Vector::Zero(domain.dim());
            break;
        case ComparatorSpec::Kind::explicit_vector:
            u = cfg.comparator.vec;
            if (u.size() != domain.dim()) throw ConfigError("comparator dimension mismatch");
            if (!domain.contains(u)) throw ConfigError("comparator outside the domain");
            break;
        case ComparatorSpec::Kind::best:
            u = best_in_hindsight(domain, losses, env.gradient_bound());
            break;
        case ComparatorSpec::Kind::automatic:
            u = env.u_star() ? *env.u_star()
                             : best_in_hindsight(domain, losses, env.gradient_bound());
            break;
    }

    RunResult result;
    result.config = cfg;
    result.comparator = u;
    RegretLedger ledger(u);
    result.rows.reserve(cfg.T);
    double prev_cum = 0.0;
    for (std::uint64_t t = 1; t <= cfg.T; ++t) {
        ledger.record(ws[t - 1], gs[t - 1], losses[t - 1]);
        RoundRow row;
        row.t = t;
        row.cum_loss = ledger.cum_loss();
        row.loss = row.cum_loss - prev_cum;
        prev_cum = row.cum_loss;
        row.regret = ledger.regret();
        row.lin_regret = ledger.lin_regret();
        row.variance = ledger.variance(variant);
        result.rows.push_back(row);
    }

    const LearningRateGrid grid = make_grid(bounds.D, bounds.G, cfg.T);
    result.bound = theorem7_bound(ledger, grid, variant);

    std::vector<double> regret_curve;
    regret_curve.reserve(cfg.T);
    for (const auto& r : result.rows) regret_curve.push_back(r.regret);
    result.slope = slope_fit(regret_curve, std::max<std::uint64_t>(1, cfg.T / 10), cfg.T);

    nlohmann::json summary;
    summary["config"] = cfg.to_json();
    summary["final_regret"] = ledger.regret();
    summary["final_lin_regret"] = ledger.lin_regret();
    summary["final_variance"] = ledger.variance(variant);
    if (result.bound.variance_bound_skipped) {
        summary["bound_variance"] = nullptr;
    } else {
        summary["bound_variance"] = result.bound.bound_variance;
    }
    summary["bound_gradient_sum"] = result.bound.bound_gradient_sum;
    if (result.slope) {
        summary["slope"] = *result.slope;
    } else {
        summary["slope"] = nullptr;
    }
    summary["seed"] = cfg.seed;
    result.summary = summary;

    if (!cfg.out.empty()) {
        std::string csv = "t,loss,cum_loss,regret,lin_regret,variance\n";
        for (const auto& r : result.rows) {
            csv += std::to_string(r.t);
            csv += ',';
            csv += detail::g17(r.loss);
            csv += ',';
            csv += detail::g17(r.cum_loss);
            csv += ',';
            csv += detail::g17(r.regret);
            csv += ',';
            csv += detail::g17(r.lin_regret);
            csv += ',';
            csv += detail::g17(r.variance);
            csv += '\n';
        }
        result.csv_path = cfg.out + ".csv";
        result.json_path = cfg.out + ".json";
        detail::write_file_atomic(result.csv_path, csv);
        detail::write_file_atomic(result.json_path, summary.dump(2) + "\n");
    }
    return result;
}

}  // namespace metagrad
