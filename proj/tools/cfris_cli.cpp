#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cfris/harness.hpp"

using namespace cfris;

namespace {

void emit(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-surface cell-free downlink simulator"};
    app.require_subcommand(1);

    std::string config_path, out_path, algos = "proposed", axis = "none", values;
    std::uint64_t seed = 1;
    int drops = 20, samples = 10000, intervals = 10, workers = 1;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key = value scenario file");
        sub->add_option("--seed", seed, "run seed");
        sub->add_option("--out", out_path, "output CSV (stdout when omitted)");
    };

    auto* validate = app.add_subcommand("validate-rate", "closed form against Monte Carlo under random phases");
    common(validate);
    validate->add_option("--samples", samples, "Monte-Carlo draws");
    validate->add_option("--values", values, "comma-separated antenna counts")->default_val("2,4,6");

    auto* optimize = app.add_subcommand("optimize", "run one algorithm on random drops");
    common(optimize);
    optimize->add_option("--algo", algos, "comma-separated algorithm names");
    optimize->add_option("--drops", drops, "number of drops");
    optimize->add_option("--intervals", intervals, "coherence intervals per frame");
    optimize->add_option("--workers", workers, "concurrent drops");

    auto* sweep = app.add_subcommand("sweep", "sweep one parameter");
    common(sweep);
    sweep->add_option("--axis", axis, "M | N | pmax-dbm | k-factor | ue-x | snr-db")->required();
    sweep->add_option("--values", values, "comma-separated sweep values")->required();
    sweep->add_option("--algo", algos, "comma-separated algorithm names");
    sweep->add_option("--drops", drops, "number of drops");
    sweep->add_option("--intervals", intervals, "coherence intervals per frame");
    sweep->add_option("--workers", workers, "concurrent drops");

    auto* moments = app.add_subcommand("moments", "moment identities against sample averages");
    common(moments);
    moments->add_option("--samples", samples, "Monte-Carlo draws");

    CLI11_PARSE(app, argc, argv);

    try {
        const SystemConfig base = config_path.empty() ? default_config() : load_config(config_path);
        if (validate->parsed()) {
            std::ostringstream os;
            os.precision(10);
            os << "sweep_value,algo,mean_wsr_bps_hz,stderr,iters_to_converge,wallclock_s\n";
            for (const auto& v : split(values)) {
                SystemConfig cfg = base;
                cfg.M = std::stoi(v);
                const auto t0 = std::chrono::steady_clock::now();
                const StatisticalCsi st = build_statistics(cfg, place_nodes(cfg, LayoutSpec::uniform(), Seed{seed, 0}),
                                                           Seed{seed, 2});
                const PhaseConfig ph = baseline_random_phases(st, Seed{seed, 3});
                const PowerAllocation eta = statistical_equal_power(st, ph, cfg.P_max);
                const auto mu = weights_of(cfg);
                const double cf = closed_form_wsr(st, ph, eta, mu, cfg.N0);
                const double t_cf = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                const MonteCarloRate mc =
                    monte_carlo_rate(st, ph, eta, samples, Seed{seed, 4}, ErgodicMode::MomentRatio, mu, cfg.N0);
                const double t_mc = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                os << cfg.M << ",closed-form," << cf << ",0,0," << t_cf << '\n';
                os << cfg.M << ",monte-carlo," << mc.wsr << ',' << mc.wsr_se << ",0," << t_mc << '\n';
            }
            emit(os.str(), out_path);
        } else if (optimize->parsed() || sweep->parsed()) {
            ExperimentSpec spec;
            spec.base = base;
            spec.seed = seed;
            spec.drops = drops;
            spec.intervals = intervals;
            spec.workers = workers;
            spec.algorithms.clear();
            for (const auto& a : split(algos)) spec.algorithms.push_back(parse_algorithm(a));
            if (sweep->parsed()) {
                spec.axis = parse_axis(axis);
                spec.values.clear();
                for (const auto& v : split(values)) spec.values.push_back(std::stod(v));
            }
            const RunResult r = run_experiment(spec);
            emit(r.csv(), out_path);
            if (r.failures > 0) std::cerr << r.failures << " drop(s) failed\n";
        } else if (moments->parsed()) {
            SystemConfig cfg = base;
            if (config_path.empty()) {
                cfg.S = 2;
                cfg.L = 2;
                cfg.M = 2;
                cfg.N_r = 2;
                cfg.N_c = 2;
                cfg.K = 2;
                cfg.mu.assign(2, 1.0);
            }
            const StatisticalCsi st =
                build_statistics(cfg, place_nodes(cfg, LayoutSpec::uniform(), Seed{seed, 0}), Seed{seed, 2});
            const PhaseConfig ph = baseline_random_phases(st, Seed{seed, 3});
            emit(moment_csv(moment_oracle(st, ph, samples, Seed{seed, 4})), out_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
