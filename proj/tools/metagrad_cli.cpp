// Command-line driver: single runs, config sweeps, and verification suites.
//
// Exit codes: 0 success, 1 run/suite failure, 2 configuration or usage error.

#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "metagrad/all.hpp"

namespace {

struct RunOptions {
    std::string env;
    std::string learner;
    std::string variant = "full";
    std::uint64_t T = 1000;
    std::int64_t d = 1;
    std::uint64_t seed = 0;
    std::string comparator = "auto";
    std::string out;
    double p_plus = 0.6;
    double mu = 0.0;
    double step_scale = 0.0;
    std::vector<double> u_bar;
};

metagrad::ExperimentConfig to_config(const RunOptions& opt) {
    metagrad::ExperimentConfig cfg;
    cfg.env = opt.env;
    cfg.learner = opt.learner;
    cfg.variant = metagrad::variant_from_string(opt.variant);
    cfg.T = opt.T;
    cfg.d = static_cast<Eigen::Index>(opt.d);
    cfg.seed = opt.seed;
    cfg.comparator = metagrad::ComparatorSpec::parse(opt.comparator);
    cfg.out = opt.out;
    cfg.p_plus = opt.p_plus;
    if (opt.mu > 0.0) cfg.mu = opt.mu;
    if (opt.step_scale > 0.0) cfg.step_scale = opt.step_scale;
    if (!opt.u_bar.empty()) {
        cfg.u_bar = Eigen::Map<const metagrad::Vector>(opt.u_bar.data(),
                                                       static_cast<Eigen::Index>(opt.u_bar.size()));
    }
    return cfg;
}

int do_run(const metagrad::ExperimentConfig& cfg) {
    const metagrad::RunResult result = metagrad::run_experiment(cfg);
    std::cout << result.summary.dump(2) << "\n";
    if (!result.csv_path.empty()) {
        std::cerr << "wrote " << result.csv_path << " and " << result.json_path << "\n";
    }
    return 0;
}

int do_sweep(const std::string& config_path) {
    std::ifstream is(config_path);
    if (!is) {
        std::cerr << "error: cannot open sweep file '" << config_path << "'\n";
        return 2;
    }
    nlohmann::json doc;
    try {
        is >> doc;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: invalid JSON in '" << config_path << "': " << e.what() << "\n";
        return 2;
    }
    if (!doc.is_array()) {
        std::cerr << "error: sweep file must hold a JSON array of config objects\n";
        return 2;
    }
    std::vector<metagrad::ExperimentConfig> configs;
    for (const auto& item : doc) {
        configs.push_back(metagrad::ExperimentConfig::from_json(item));  // throws ConfigError
    }
    nlohmann::json summaries = nlohmann::json::array();
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const metagrad::RunResult result = metagrad::run_experiment(configs[i]);
        summaries.push_back(result.summary);
        std::cerr << "[" << (i + 1) << "/" << configs.size() << "] " << configs[i].env << "/"
                  << configs[i].learner << " seed=" << configs[i].seed;
        if (!result.csv_path.empty()) std::cerr << " -> " << result.csv_path;
        std::cerr << "\n";
    }
    std::cout << summaries.dump(2) << "\n";
    return 0;
}

int do_check(const std::string& suite_name) {
    const auto t0 = std::chrono::steady_clock::now();
    const metagrad::suites::SuiteResult res = metagrad::suites::run_suite(suite_name);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& line : res.lines) std::cout << "  " << line << "\n";
    std::printf("[%s] suite %s (%.1fs)\n", res.pass ? "PASS" : "FAIL", res.name.c_str(), secs);
    return res.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"metagrad: adaptive online convex optimization benchmark"};
    app.require_subcommand(1);

    RunOptions opt;
    CLI::App* run = app.add_subcommand("run", "simulate one (environment, learner) configuration");
    run->add_option("--env", opt.env,
                    "environment: fixed_absolute|stochastic_absolute|hinge_sphere|scripted_random")
        ->required();
    run->add_option("--learner", opt.learner, "learner: metagrad|ogd|adagrad|ons")->required();
    run->add_option("--variant", opt.variant, "metagrad variant: full|diag");
    run->add_option("--T", opt.T, "number of rounds")->required();
    run->add_option("--d", opt.d, "dimension");
    run->add_option("--seed", opt.seed, "RNG seed");
    run->add_option("--comparator", opt.comparator, "auto|origin|best|<v1,v2,...>");
    run->add_option("--out", opt.out, "output stem; writes <out>.csv and <out>.json");
    run->add_option("--p-plus", opt.p_plus, "two-point environment probability of the +1/2 outcome");
    run->add_option("--mu", opt.mu, "strong-convexity constant for ogd (enables 1/(mu t) steps)");
    run->add_option("--step-scale", opt.step_scale, "adagrad step scale (default: domain diameter)");
    run->add_option("--u-bar", opt.u_bar, "hinge_sphere direction (d numbers)")->expected(-1);

    std::string sweep_path;
    CLI::App* sweep = app.add_subcommand("sweep", "run every config in a JSON array file");
    sweep->add_option("config", sweep_path, "path to a JSON array of run configs")->required();

    std::string suite_name;
    CLI::App* check = app.add_subcommand("check", "run a verification suite");
    check->add_option("--suite", suite_name,
                      "lemma4|lemma5|bound|exp-concavity|bernstein|directional")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // --help exits 0; anything else is a usage error
    }

    try {
        if (run->parsed()) return do_run(to_config(opt));
        if (sweep->parsed()) return do_sweep(sweep_path);
        return do_check(suite_name);
    } catch (const metagrad::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const metagrad::GradientBoundViolation& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
