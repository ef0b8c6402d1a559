#include <doctest.h>

#include <cmath>

#include "cfris/harness.hpp"

using namespace cfris;

namespace {

SystemConfig small_config(int L = 1) {
    SystemConfig c = default_config();
    c.S = 2;
    c.M = 2;
    c.L = L;
    c.N_r = 2;
    c.N_c = 2;
    c.K = 2;
    c.mu = {1.0, 1.0};
    return c;
}

AoOptions quick_ao() {
    AoOptions ao;
    ao.max_rounds = 4;
    ao.pdd.max_rounds = 3;
    ao.pdd.max_outer = 10;
    ao.power.max_iter = 100;
    return ao;
}

struct Frame {
    StatisticalCsi st;
    std::vector<ChannelRealization> reals;
};

Frame make_frame(const SystemConfig& c, std::uint64_t seed, int intervals = 3) {
    Frame f;
    f.st = build_statistics(c, place_nodes(c, LayoutSpec::uniform(), Seed{seed, 0}), Seed{seed, 1});
    for (int j = 0; j < intervals; ++j) f.reals.push_back(sample_channels(f.st, Seed{seed, 10 + static_cast<std::uint64_t>(j)}));
    return f;
}

}  // namespace

TEST_CASE("random phase baseline") {
    const SystemConfig c = small_config(2);
    const Frame f = make_frame(c, 1, 1);
    const PhaseConfig a = baseline_random_phases(f.st, Seed{4, 1});
    const PhaseConfig b = baseline_random_phases(f.st, Seed{4, 1});
    const PhaseConfig d = baseline_random_phases(f.st, Seed{4, 2});
    CHECK(a.u() == b.u());
    CHECK(a.u() != d.u());
    CHECK(a.u().size() == c.L * c.N());
    for (Eigen::Index i = 0; i < a.u().size(); ++i) CHECK(std::abs(std::abs(a.u()(i)) - 1.0) <= 1e-12);
}

TEST_CASE("uniform power baseline") {
    const SystemConfig c = small_config();
    const Frame f = make_frame(c, 2, 1);
    const PhaseConfig ph(c.L, c.N());
    const PowerAllocation p = baseline_uniform_power(f.reals[0], ph, c);
    const EffectiveChannels h = effective_channel(f.reals[0], ph);
    const RVec used = p.used_power(h);
    for (int s = 0; s < c.S; ++s) CHECK(used(s) == doctest::Approx(c.P_max).epsilon(1e-14));
    for (int k = 0; k < c.K; ++k)
        for (int s = 0; s < c.S; ++s)
            CHECK(p.eta(k, s) == doctest::Approx(c.P_max / (c.K * h.at(k, s).squaredNorm())).epsilon(1e-14));

    SystemConfig one = c;
    one.K = 1;
    one.mu = {1.0};
    const Frame g = make_frame(one, 2, 1);
    const PowerAllocation q = baseline_uniform_power(g.reals[0], ph, one);
    const EffectiveChannels h1 = effective_channel(g.reals[0], ph);
    CHECK(q.eta(0, 0) * h1.at(0, 0).squaredNorm() == doctest::Approx(one.P_max));
}

TEST_CASE("frame rate and nominal power") {
    const SystemConfig c = small_config();
    const Frame f = make_frame(c, 3, 2);
    const PhaseConfig ph(c.L, c.N());
    std::vector<PowerAllocation> p{baseline_uniform_power(f.reals[0], ph, c), baseline_uniform_power(f.reals[1], ph, c)};
    const double ref = 0.5 * (instantaneous_rate(f.reals[0], ph, p[0], c).wsr + instantaneous_rate(f.reals[1], ph, p[1], c).wsr);
    CHECK(frame_wsr(f.reals, ph, p, c) == doctest::Approx(ref).epsilon(1e-14));
    CHECK(nominal_power(p).eta.isApprox(0.5 * (p[0].eta + p[1].eta)));
    CHECK_THROWS(frame_wsr(f.reals, ph, {p[0]}, c));
    CHECK_THROWS(nominal_power({}));
}

TEST_CASE("alternating optimization without surfaces only allocates power") {
    const SystemConfig c = small_config(0);
    const Frame f = make_frame(c, 4);
    const AoResult r = alternating_optimize(f.st, f.reals, c, PhaseConfig(0, c.N()), quick_ao());
    CHECK(r.phases.u().size() == 0);
    REQUIRE(r.powers.size() == f.reals.size());
    for (std::size_t j = 0; j < f.reals.size(); ++j) {
        const EffectiveChannels h = effective_channel(f.reals[j], r.phases);
        const PowerAllocation ref =
            optimize_power(h, equal_power(h, c.P_max), weights_of(c), c.N0, c.P_max, quick_ao().power, nullptr);
        CHECK(instantaneous_rate(h, r.powers[j], weights_of(c), c.N0).wsr >=
              instantaneous_rate(h, ref, weights_of(c), c.N0).wsr * (1 - 1e-9));
    }
    CHECK_THROWS(alternating_optimize(f.st, {}, c, PhaseConfig(0, c.N()), quick_ao()));
}

TEST_CASE("alternating optimization is monotone and feasible") {
    const SystemConfig c = small_config(2);
    for (std::uint64_t seed = 5; seed <= 7; ++seed) {
        const Frame f = make_frame(c, seed);
        const AoResult r = alternating_optimize(f.st, f.reals, c, baseline_random_phases(f.st, Seed{seed, 3}), quick_ao());
        REQUIRE(r.trace.size() == static_cast<std::size_t>(r.rounds) + 1);
        for (std::size_t j = 1; j < r.trace.size(); ++j) CHECK(r.trace[j] >= r.trace[j - 1] * (1 - 1e-6));
        CHECK(r.rounds <= quick_ao().max_rounds);
        CHECK(frame_wsr(f.reals, r.phases, r.powers, c) == doctest::Approx(r.trace.back()).epsilon(1e-12));
        for (std::size_t j = 0; j < f.reals.size(); ++j)
            CHECK(r.powers[j].feasible(effective_channel(f.reals[j], r.phases), c.P_max, 1e-6));
    }
}

TEST_CASE("names round-trip") {
    for (Algorithm a : {Algorithm::Proposed, Algorithm::RandomPhases, Algorithm::UniformPower,
                        Algorithm::RandomEverything, Algorithm::NoRis, Algorithm::DasLayout,
                        Algorithm::CentralizedLayout})
        CHECK(parse_algorithm(algorithm_name(a)) == a);
    for (SweepAxis a : {SweepAxis::None, SweepAxis::M, SweepAxis::N, SweepAxis::PmaxDbm, SweepAxis::KFactor,
                        SweepAxis::UeX, SweepAxis::SnrDb})
        CHECK(parse_axis(axis_name(a)) == a);
    CHECK_THROWS(parse_algorithm("best"));
    CHECK_THROWS(parse_axis("time"));
}

TEST_CASE("sweep values reach the configuration") {
    SystemConfig c = default_config();
    LayoutSpec l;
    apply_sweep(SweepAxis::N, 32, c, l);
    CHECK(c.N() == 32);
    CHECK(c.N_r == 4);
    apply_sweep(SweepAxis::M, 6, c, l);
    CHECK(c.M == 6);
    apply_sweep(SweepAxis::PmaxDbm, 30, c, l);
    CHECK(c.P_max == doctest::Approx(1.0));
    apply_sweep(SweepAxis::KFactor, 2, c, l);
    CHECK(c.K_direct == 2.0);
    apply_sweep(SweepAxis::SnrDb, 100, c, l);
    CHECK(c.P_max == doctest::Approx(c.N0 * 1e10));
    apply_sweep(SweepAxis::UeX, 30, c, l);
    CHECK(l.kind == LayoutSpec::Kind::UeClusterAt);
    CHECK(l.cluster_x == 30.0);
    CHECK_THROWS(apply_sweep(SweepAxis::M, 0, c, l));
}

TEST_CASE("equal-aperture layouts") {
    const SystemConfig c = default_config();
    const SystemConfig d = das_config(c);
    CHECK(d.S * d.M == c.S * c.M);
    CHECK(d.S * d.P_max == doctest::Approx(c.S * c.P_max));
    const SystemConfig z = centralized_config(c);
    CHECK(z.S == 1);
    CHECK(z.M == c.S * c.M);
    CHECK(z.P_max == doctest::Approx(c.S * c.P_max));
}

TEST_CASE("experiment validation") {
    ExperimentSpec s;
    s.values.clear();
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.values = {2, 1};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.values = {1};
    s.drops = 0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.drops = 1;
    s.algorithms.clear();
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    CHECK_THROWS_AS(run_experiment(s), std::invalid_argument);
}

TEST_CASE("experiments are deterministic") {
    ExperimentSpec s;
    s.base = small_config(1);
    s.drops = 3;
    s.intervals = 2;
    s.seed = 9;
    s.ao = quick_ao();
    s.algorithms = {Algorithm::Proposed, Algorithm::RandomEverything, Algorithm::NoRis, Algorithm::UniformPower,
                    Algorithm::RandomPhases, Algorithm::DasLayout, Algorithm::CentralizedLayout};
    const RunResult a = run_experiment(s);
    const RunResult b = run_experiment(s);
    CHECK(a.csv(false) == b.csv(false));
    CHECK(a.failures == 0);
    CHECK(a.points.size() == s.algorithms.size());
    for (const auto& p : a.points) {
        CHECK(p.stderr_wsr >= 0.0);
        CHECK(std::isfinite(p.mean_wsr));
        CHECK(p.mean_iterations <= s.ao.max_rounds);
    }
    s.workers = 3;
    CHECK(run_experiment(s).csv(false) == a.csv(false));
    CHECK(a.csv().rfind("sweep_value,algo,mean_wsr_bps_hz,stderr,iters_to_converge,wallclock_s\n", 0) == 0);
}

TEST_CASE("surfaces help a user cluster") {
    ExperimentSpec s;
    s.base = small_config(2);
    s.layout = LayoutSpec::cluster_at(50, 60);
    s.drops = 20;
    s.intervals = 2;
    s.ao = quick_ao();
    s.algorithms = {Algorithm::Proposed, Algorithm::NoRis};
    const RunResult r = run_experiment(s);
    REQUIRE(r.points.size() == 2);
    int wins = 0;
    for (int d = 0; d < s.drops; ++d) wins += r.points[0].drops[d].wsr >= r.points[1].drops[d].wsr ? 1 : 0;
    CHECK(wins >= 15);
}
