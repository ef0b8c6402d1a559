#include "cfris/harness.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <sstream>
#include <stdexcept>

namespace cfris {

double frame_wsr(const std::vector<ChannelRealization>& reals, const PhaseConfig& phases,
                 const std::vector<PowerAllocation>& powers, const SystemConfig& cfg) {
    if (reals.empty() || reals.size() != powers.size()) throw std::invalid_argument("frame_wsr: interval mismatch");
    double sum = 0.0;
    for (std::size_t j = 0; j < reals.size(); ++j) sum += instantaneous_rate(reals[j], phases, powers[j], cfg).wsr;
    return sum / static_cast<double>(reals.size());
}

PowerAllocation nominal_power(const std::vector<PowerAllocation>& powers) {
    if (powers.empty()) throw std::invalid_argument("nominal_power: no allocations");
    RMat m = RMat::Zero(powers.front().eta.rows(), powers.front().eta.cols());
    for (const auto& p : powers) m += p.eta;
    return PowerAllocation(m / static_cast<double>(powers.size()));
}

namespace {

// Keeps each link's transmit power eta ||h||^2 when the effective channel changes.
PowerAllocation carry_power(const PowerAllocation& eta, const EffectiveChannels& from, const EffectiveChannels& to) {
    RMat e = RMat::Zero(eta.eta.rows(), eta.eta.cols());
    for (int k = 0; k < to.K; ++k)
        for (int s = 0; s < to.S; ++s) {
            const double g = to.at(k, s).squaredNorm();
            if (g > 0.0) e(k, s) = eta.eta(k, s) * from.at(k, s).squaredNorm() / g;
        }
    return PowerAllocation(e);
}

std::vector<PowerAllocation> optimize_all(const std::vector<EffectiveChannels>& hs,
                                          const std::vector<PowerAllocation>& init, const SystemConfig& cfg,
                                          const PowerOptions& opts, std::vector<std::string>* notes) {
    std::vector<PowerAllocation> out;
    out.reserve(hs.size());
    const auto mu = weights_of(cfg);
    for (std::size_t j = 0; j < hs.size(); ++j) {
        PowerTrace tr;
        out.push_back(optimize_power(hs[j], init[j], mu, cfg.N0, cfg.P_max, opts, &tr));
        if (!tr.converged && notes) notes->push_back("interval " + std::to_string(j) + ": " + tr.note);
    }
    return out;
}

std::vector<EffectiveChannels> effective_all(const std::vector<ChannelRealization>& reals, const PhaseConfig& phases) {
    std::vector<EffectiveChannels> hs;
    hs.reserve(reals.size());
    for (const auto& r : reals) hs.push_back(effective_channel(r, phases));
    return hs;
}

}  // namespace

AoResult alternating_optimize(const StatisticalCsi& stats, const std::vector<ChannelRealization>& reals,
                              const SystemConfig& cfg, const PhaseConfig& init, const AoOptions& opts) {
    if (reals.empty()) throw std::invalid_argument("alternating_optimize: need at least one realization");
    AoResult res;
    res.phases = init;
    auto hs = effective_all(reals, res.phases);
    for (const auto& h : hs) res.powers.push_back(equal_power(h, cfg.P_max));
    double R = frame_wsr(reals, res.phases, res.powers, cfg);
    res.trace.push_back(R);
    const auto mu = weights_of(cfg);

    for (int round = 0; round < opts.max_rounds; ++round) {
        PhaseConfig phases = res.phases;
        if (stats.L > 0) {
            PhaseTrace ptr;
            phases = optimize_phases(stats, nominal_power(res.powers), res.phases, mu, cfg.N0, opts.pdd, &ptr);
            if (!ptr.note.empty()) res.notes.push_back("round " + std::to_string(round) + " phases: " + ptr.note);
        }
        const auto hs_new = effective_all(reals, phases);
        std::vector<PowerAllocation> carried;
        for (std::size_t j = 0; j < reals.size(); ++j) carried.push_back(carry_power(res.powers[j], hs[j], hs_new[j]));
        auto powers = optimize_all(hs_new, carried, cfg, opts.power, &res.notes);
        double Rn = frame_wsr(reals, phases, powers, cfg);
        if (Rn < R) {
            // The statistical phase update lost ground on this frame; refine power under the current phases.
            phases = res.phases;
            powers = optimize_all(hs, res.powers, cfg, opts.power, &res.notes);
            Rn = frame_wsr(reals, phases, powers, cfg);
        }
        ++res.rounds;
        const double change = (Rn - R) / std::max(std::abs(R), 1e-300);
        if (Rn >= R) {
            res.phases = phases;
            res.powers = std::move(powers);
            hs = effective_all(reals, res.phases);
            R = Rn;
        }
        res.trace.push_back(R);
        if (change < opts.tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

PhaseConfig baseline_random_phases(const StatisticalCsi& stats, Seed seed) {
    auto eng = make_engine(seed);
    std::uniform_real_distribution<double> U(0.0, 2.0 * kPi);
    RVec ang(static_cast<Eigen::Index>(stats.L) * stats.N);
    for (Eigen::Index i = 0; i < ang.size(); ++i) ang(i) = U(eng);
    return PhaseConfig::from_angles(ang, stats.L, stats.N);
}

PowerAllocation baseline_uniform_power(const ChannelRealization& real, const PhaseConfig& phases,
                                       const SystemConfig& cfg) {
    return equal_power(effective_channel(real, phases), cfg.P_max);
}

std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Proposed: return "proposed";
        case Algorithm::RandomPhases: return "random-phases";
        case Algorithm::UniformPower: return "uniform-power";
        case Algorithm::RandomEverything: return "random-everything";
        case Algorithm::NoRis: return "no-ris";
        case Algorithm::DasLayout: return "das";
        case Algorithm::CentralizedLayout: return "centralized";
    }
    return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
    for (Algorithm a : {Algorithm::Proposed, Algorithm::RandomPhases, Algorithm::UniformPower,
                        Algorithm::RandomEverything, Algorithm::NoRis, Algorithm::DasLayout,
                        Algorithm::CentralizedLayout})
        if (algorithm_name(a) == name) return a;
    throw std::invalid_argument("unknown algorithm: " + name);
}

std::string axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::None: return "none";
        case SweepAxis::M: return "M";
        case SweepAxis::N: return "N";
        case SweepAxis::PmaxDbm: return "pmax-dbm";
        case SweepAxis::KFactor: return "k-factor";
        case SweepAxis::UeX: return "ue-x";
        case SweepAxis::SnrDb: return "snr-db";
    }
    return "unknown";
}

SweepAxis parse_axis(const std::string& name) {
    for (SweepAxis a : {SweepAxis::None, SweepAxis::M, SweepAxis::N, SweepAxis::PmaxDbm, SweepAxis::KFactor,
                        SweepAxis::UeX, SweepAxis::SnrDb})
        if (axis_name(a) == name) return a;
    throw std::invalid_argument("unknown sweep axis: " + name);
}

void apply_sweep(SweepAxis axis, double v, SystemConfig& cfg, LayoutSpec& layout) {
    switch (axis) {
        case SweepAxis::None: break;
        case SweepAxis::M: cfg.M = static_cast<int>(std::lround(v)); break;
        case SweepAxis::N: {
            const int N = static_cast<int>(std::lround(v));
            if (N < 1) throw std::invalid_argument("apply_sweep: N must be positive");
            int r = static_cast<int>(std::floor(std::sqrt(static_cast<double>(N))));
            while (N % r != 0) --r;
            cfg.N_r = r;
            cfg.N_c = N / r;
            break;
        }
        case SweepAxis::PmaxDbm: cfg.P_max = dbm_to_watt(v); break;
        case SweepAxis::KFactor: cfg.K_bs_ris = cfg.K_ris_ue = cfg.K_direct = v; break;
        case SweepAxis::UeX:
            layout.kind = LayoutSpec::Kind::UeClusterAt;
            layout.cluster_x = v;
            break;
        case SweepAxis::SnrDb: cfg.P_max = cfg.N0 * std::pow(10.0, v / 10.0); break;
    }
    cfg.validate();
}

void ExperimentSpec::validate() const {
    if (values.empty()) throw std::invalid_argument("experiment: empty sweep");
    for (std::size_t i = 1; i < values.size(); ++i)
        if (!(values[i] > values[i - 1])) throw std::invalid_argument("experiment: sweep values must increase");
    if (drops < 1) throw std::invalid_argument("experiment: drops must be at least 1");
    if (intervals < 1) throw std::invalid_argument("experiment: intervals must be at least 1");
    if (algorithms.empty()) throw std::invalid_argument("experiment: no algorithm selected");
    base.validate();
}

SystemConfig das_config(const SystemConfig& cfg) {
    SystemConfig c = cfg;
    c.S = cfg.S * cfg.M;
    c.M = 1;
    c.P_max = cfg.P_max / cfg.M;
    return c;
}

SystemConfig centralized_config(const SystemConfig& cfg) {
    SystemConfig c = cfg;
    c.S = 1;
    c.M = cfg.S * cfg.M;
    c.P_max = cfg.P_max * cfg.S;
    return c;
}

DropOutcome run_drop(const SystemConfig& base, const LayoutSpec& layout, Algorithm algo, int intervals, Seed seed,
                     const AoOptions& ao) {
    DropOutcome out;
    SystemConfig cfg = base;
    NetworkGeometry geom = place_nodes(base, layout, seed.child(0));
    if (algo == Algorithm::DasLayout || algo == Algorithm::CentralizedLayout) {
        cfg = algo == Algorithm::DasLayout ? das_config(base) : centralized_config(base);
        geom.bs.clear();
        if (algo == Algorithm::DasLayout) {
            auto eng = make_engine(seed.child(1));
            std::uniform_real_distribution<double> U(0.0, base.area_side);
            for (int s = 0; s < cfg.S; ++s) {
                const double x = U(eng);
                const double y = U(eng);
                geom.bs.push_back({x, y, cfg.h_bs});
            }
        } else {
            geom.bs.push_back({0.5 * base.area_side, 0.5 * base.area_side, cfg.h_bs});
        }
    } else if (algo == Algorithm::NoRis) {
        cfg.L = 0;
        geom.ris.clear();
    }
    const StatisticalCsi stats = build_statistics(cfg, geom, seed.child(2));
    std::vector<ChannelRealization> reals;
    for (int j = 0; j < intervals; ++j) reals.push_back(sample_channels(stats, seed.child(100 + static_cast<std::uint64_t>(j))));
    const PhaseConfig random_phases = baseline_random_phases(stats, seed.child(3));
    const auto mu = weights_of(cfg);

    auto power_only = [&](const PhaseConfig& phases) {
        std::vector<PowerAllocation> p;
        for (const auto& r : reals) {
            const auto h = effective_channel(r, phases);
            p.push_back(optimize_power(h, equal_power(h, cfg.P_max), mu, cfg.N0, cfg.P_max, ao.power, nullptr));
        }
        return frame_wsr(reals, phases, p, cfg);
    };
    auto uniform_only = [&](const PhaseConfig& phases) {
        std::vector<PowerAllocation> p;
        for (const auto& r : reals) p.push_back(baseline_uniform_power(r, phases, cfg));
        return frame_wsr(reals, phases, p, cfg);
    };

    switch (algo) {
        case Algorithm::Proposed:
        case Algorithm::DasLayout:
        case Algorithm::CentralizedLayout: {
            const AoResult r = alternating_optimize(stats, reals, cfg, random_phases, ao);
            out.wsr = r.trace.back();
            out.iterations = r.rounds;
            if (!r.converged) out.message = "alternating optimization hit the round limit";
            break;
        }
        case Algorithm::RandomPhases: out.wsr = power_only(random_phases); break;
        case Algorithm::NoRis: out.wsr = power_only(random_phases); break;
        case Algorithm::RandomEverything: out.wsr = uniform_only(random_phases); break;
        case Algorithm::UniformPower: {
            PhaseTrace tr;
            const PowerAllocation eta = statistical_equal_power(stats, random_phases, cfg.P_max);
            const PhaseConfig ph = stats.L > 0
                                       ? optimize_phases(stats, eta, random_phases, mu, cfg.N0, ao.pdd, &tr)
                                       : random_phases;
            out.wsr = uniform_only(ph);
            out.iterations = static_cast<int>(tr.wsr.size()) - 1;
            break;
        }
    }
    return out;
}

RunResult run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    RunResult res;
    for (double v : spec.values) {
        SystemConfig cfg = spec.base;
        LayoutSpec layout = spec.layout;
        apply_sweep(spec.axis, v, cfg, layout);
        for (Algorithm algo : spec.algorithms) {
            PointResult pt;
            pt.sweep_value = v;
            pt.algorithm = algo;
            const auto t0 = std::chrono::steady_clock::now();
            auto one = [&](int d) {
                try {
                    return run_drop(cfg, layout, algo, spec.intervals,
                                    Seed{spec.seed, static_cast<std::uint64_t>(d)}, spec.ao);
                } catch (const std::exception& e) {
                    DropOutcome o;
                    o.failed = true;
                    o.message = e.what();
                    return o;
                }
            };
            pt.drops.resize(static_cast<std::size_t>(spec.drops));
            const int workers = std::max(1, spec.workers);
            for (int start = 0; start < spec.drops; start += workers) {
                std::vector<std::future<DropOutcome>> jobs;
                for (int d = start; d < std::min(spec.drops, start + workers); ++d)
                    jobs.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, one, d));
                for (std::size_t j = 0; j < jobs.size(); ++j)
                    pt.drops[static_cast<std::size_t>(start) + j] = jobs[j].get();
            }
            pt.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            double s1 = 0.0, s2 = 0.0, it = 0.0;
            int n = 0;
            for (const auto& d : pt.drops) {
                if (d.failed) {
                    ++pt.failures;
                    continue;
                }
                s1 += d.wsr;
                s2 += d.wsr * d.wsr;
                it += d.iterations;
                ++n;
            }
            if (n > 0) {
                pt.mean_wsr = s1 / n;
                pt.mean_iterations = it / n;
                if (n > 1) pt.stderr_wsr = std::sqrt(std::max(0.0, (s2 - s1 * s1 / n) / (n - 1.0)) / n);
            } else {
                pt.mean_wsr = std::nan("");
            }
            res.failures += pt.failures;
            res.points.push_back(std::move(pt));
        }
    }
    return res;
}

std::string RunResult::csv(bool with_wallclock) const {
    std::ostringstream os;
    os.precision(10);
    os << "sweep_value,algo,mean_wsr_bps_hz,stderr,iters_to_converge,wallclock_s\n";
    for (const auto& p : points)
        os << p.sweep_value << ',' << algorithm_name(p.algorithm) << ',' << p.mean_wsr << ',' << p.stderr_wsr << ','
           << p.mean_iterations << ',' << (with_wallclock ? p.wallclock_s : 0.0) << '\n';
    return os.str();
}

}  // namespace cfris
