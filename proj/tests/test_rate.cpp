#include <doctest.h>

#include <cmath>
#include <random>

#include "cfris/rate.hpp"

using namespace cfris;

namespace {

SystemConfig tiny_config(int L = 2) {
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

StatisticalCsi stats_for(const SystemConfig& c, std::uint64_t seed) {
    return build_statistics(c, place_nodes(c, LayoutSpec::uniform(), Seed{seed, 0}), Seed{seed, 1});
}

PhaseConfig random_phases(int L, int N, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> U(0.0, 2.0 * kPi);
    RVec a(L * N);
    for (int i = 0; i < L * N; ++i) a(i) = U(eng);
    return PhaseConfig::from_angles(a, L, N);
}

RMat random_eta(int K, int S, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> U(0.1, 2.0);
    RMat e(K, S);
    for (int k = 0; k < K; ++k)
        for (int s = 0; s < S; ++s) e(k, s) = U(eng);
    return e;
}

// Scalar-loop SINR under maximum-ratio precoding.
RVec naive_sinr(const EffectiveChannels& h, const RMat& eta, double N0) {
    RVec out(h.K);
    for (int k = 0; k < h.K; ++k) {
        double sig = 0.0;
        for (int s = 0; s < h.S; ++s) {
            double g = 0.0;
            for (int m = 0; m < h.M; ++m) g += std::norm(h.at(k, s)(m));
            sig += std::sqrt(eta(k, s)) * g;
        }
        double intf = 0.0;
        for (int i = 0; i < h.K; ++i) {
            if (i == k) continue;
            cplx acc = 0.0;
            for (int s = 0; s < h.S; ++s) {
                cplx ip = 0.0;
                for (int m = 0; m < h.M; ++m) ip += h.at(k, s)(m) * std::conj(h.at(i, s)(m));
                acc += std::sqrt(eta(i, s)) * ip;
            }
            intf += std::norm(acc);
        }
        out(k) = sig * sig / (intf + N0);
    }
    return out;
}

}  // namespace

TEST_CASE("instantaneous rate matches a scalar loop") {
    const SystemConfig c = tiny_config();
    const StatisticalCsi st = stats_for(c, 3);
    const auto mu = weights_of(c);
    for (int trial = 0; trial < 100; ++trial) {
        const auto t = static_cast<std::uint64_t>(trial);
        const ChannelRealization r = sample_channels(st, Seed{5, t});
        const PhaseConfig ph = random_phases(c.L, c.N(), 100 + t);
        const EffectiveChannels h = effective_channel(r, ph);
        const RMat eta = random_eta(c.K, c.S, 200 + t) * 1e3;
        const RateReport rep = instantaneous_rate(h, PowerAllocation(eta), mu, c.N0);
        const RVec ref = naive_sinr(h, eta, c.N0);
        for (int k = 0; k < c.K; ++k) {
            CHECK(std::abs(rep.sinr(k) - ref(k)) <= 1e-10 * ref(k));
            CHECK(rep.rate(k) == doctest::Approx(std::log2(1.0 + ref(k))).epsilon(1e-10));
        }
        CHECK(rep.wsr == doctest::Approx(rep.rate.sum()).epsilon(1e-12));
    }
}

TEST_CASE("single user has no interference") {
    SystemConfig c = tiny_config();
    c.K = 1;
    c.mu = {2.0};
    const StatisticalCsi st = stats_for(c, 4);
    const ChannelRealization r = sample_channels(st, Seed{1, 1});
    const EffectiveChannels h = effective_channel(r, PhaseConfig(c.L, c.N()));
    RMat eta(1, 2);
    eta << 3.0, 0.5;
    const RateReport rep = instantaneous_rate(h, PowerAllocation(eta), c.mu, c.N0);
    const double q = std::sqrt(3.0) * h.at(0, 0).squaredNorm() + std::sqrt(0.5) * h.at(0, 1).squaredNorm();
    CHECK(rep.sinr(0) == doctest::Approx(q * q / c.N0).epsilon(1e-12));
    CHECK(rep.interference(0) == 0.0);
    CHECK(rep.wsr == doctest::Approx(2.0 * std::log2(1.0 + q * q / c.N0)));
}

TEST_CASE("zero power gives zero rate") {
    const SystemConfig c = tiny_config();
    const StatisticalCsi st = stats_for(c, 4);
    const ChannelRealization r = sample_channels(st, Seed{1, 1});
    const RateReport rep = instantaneous_rate(r, PhaseConfig(c.L, c.N()), PowerAllocation(RMat::Zero(2, 2)), c);
    CHECK(rep.wsr == 0.0);
    CHECK(rep.rate.isZero());
    RMat neg = RMat::Ones(2, 2);
    neg(1, 0) = -1.0;
    CHECK_THROWS(instantaneous_rate(r, PhaseConfig(c.L, c.N()), PowerAllocation(neg), c));
    CHECK_THROWS(instantaneous_rate(r, PhaseConfig(c.L, c.N()), PowerAllocation(RMat::Ones(3, 2)), c));
}

TEST_CASE("closed-form rate edge values") {
    ClosedFormTerms T;
    T.K = 2;
    T.S = 1;
    T.A = RVec::Zero(2);
    T.B = RMat::Zero(2, 2);
    T.A(1) = 3.0;
    T.B(1, 0) = 2.0;
    const RVec r = closed_form_rate(T, 1.0);
    CHECK(r(0) == 0.0);
    CHECK(r(1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(weighted_sum(r, {5.0, 2.0}) == doctest::Approx(2.0));
}

TEST_CASE("closed-form rate is monotone in its moments") {
    std::mt19937_64 eng(12);
    std::uniform_real_distribution<double> U(0.01, 10.0), D(1e-6, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        ClosedFormTerms T;
        T.K = 3;
        T.S = 1;
        T.A = RVec(3);
        T.B = RMat::Zero(3, 3);
        for (int k = 0; k < 3; ++k) {
            T.A(k) = U(eng);
            for (int i = 0; i < 3; ++i)
                if (i != k) T.B(k, i) = U(eng);
        }
        const RVec base = closed_form_rate(T, 0.5);
        ClosedFormTerms up = T;
        up.A(1) += D(eng);
        CHECK(closed_form_rate(up, 0.5)(1) > base(1));
        ClosedFormTerms dn = T;
        dn.B(1, 2) += D(eng);
        CHECK(closed_form_rate(dn, 0.5)(1) < base(1));
    }
}

TEST_CASE("mean channel is the expected effective channel") {
    const SystemConfig c = tiny_config();
    const StatisticalCsi st = stats_for(c, 8);
    const PhaseConfig ph = random_phases(c.L, c.N(), 3);
    const auto hb = mean_effective(st, ph.u());
    const EffectiveChannels ref = effective_channel(mean_channels(st), ph);
    for (int k = 0; k < c.K; ++k)
        for (int s = 0; s < c.S; ++s) CHECK((hb[k * c.S + s] - ref.at(k, s)).norm() <= 1e-12 * ref.at(k, s).norm());
    const ClosedFormTerms T = closed_form_terms(st, ph, PowerAllocation(RMat::Ones(2, 2)));
    CHECK((T.hb(1, 0) - ref.at(1, 0)).norm() <= 1e-12 * ref.at(1, 0).norm());
}

TEST_CASE("moments are nonnegative") {
    const SystemConfig c = tiny_config();
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const StatisticalCsi st = stats_for(c, seed);
        const ClosedFormTerms T =
            closed_form_terms(st, random_phases(c.L, c.N(), seed), PowerAllocation(random_eta(2, 2, seed)));
        CHECK((T.A.array() >= 0).all());
        CHECK((T.B.array() >= 0).all());
        CHECK(T.B(0, 0) == 0.0);
        CHECK(T.A(0) == doctest::Approx(T.a_terms[0].total()).epsilon(1e-12));
        CHECK(T.B(0, 1) == doctest::Approx(T.b_terms[1].total()).epsilon(1e-12));
    }
}

TEST_CASE("direct-only scattering signal moment") {
    SystemConfig c = tiny_config(0);
    c.M = 3;
    c.K_direct = 0.0;
    const StatisticalCsi st = stats_for(c, 6);
    const RMat eta = random_eta(2, 2, 9);
    const ClosedFormTerms T = closed_form_terms(st, PhaseConfig(0, c.N()), PowerAllocation(eta));
    const double M = c.M;
    for (int k = 0; k < c.K; ++k) {
        double ref = 0.0;
        for (int s = 0; s < c.S; ++s) {
            const double bs = st.dl(k, s).b * st.dl(k, s).b;
            for (int t = 0; t < c.S; ++t) {
                const double bt = st.dl(k, t).b * st.dl(k, t).b;
                ref += std::sqrt(eta(k, s) * eta(k, t)) * M * M * bs * bt;
            }
            ref += eta(k, s) * M * bs * bs;
        }
        CHECK(T.A(k) == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("scattering-only closed form equals the special case") {
    SystemConfig c = tiny_config();
    c.K_bs_ris = c.K_ris_ue = c.K_direct = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const StatisticalCsi st = stats_for(c, seed);
        const PowerAllocation eta(random_eta(2, 2, seed));
        const RVec ref = closed_form_rate(closed_form_terms(st, random_phases(c.L, c.N(), seed), eta), c.N0);
        const RVec nl = nlos_rate(st, eta, c.N0);
        for (int k = 0; k < c.K; ++k) CHECK(std::abs(nl(k) - ref(k)) <= 1e-10 * std::abs(ref(k)));
        CHECK(nlos_rate(st, eta, c.N0) == nl);
    }
    const StatisticalCsi los = stats_for(tiny_config(), 1);
    CHECK_THROWS_AS(nlos_rate(los, PowerAllocation(RMat::Ones(2, 2)), 1e-11), std::invalid_argument);
}

TEST_CASE("closed form is invariant to a rotation moved between the surface and its user vectors") {
    const SystemConfig c = tiny_config();
    const StatisticalCsi st = stats_for(c, 11);
    const PhaseConfig ph = random_phases(c.L, c.N(), 4);
    const PowerAllocation eta(random_eta(2, 2, 4));
    const ClosedFormTerms T0 = closed_form_terms(st, ph, eta);

    StatisticalCsi rot = st;
    const cplx w = std::polar(1.0, 0.9);
    const int l = 1;
    for (int k = 0; k < c.K; ++k) rot.hr_los[static_cast<std::size_t>(l * c.K + k)] *= w;
    CVec u = ph.u();
    u.segment(l * c.N(), c.N()) *= std::conj(w);
    const ClosedFormTerms T1 = closed_form_terms(rot, PhaseConfig(u, c.L, c.N()), eta);
    for (int k = 0; k < c.K; ++k) {
        CHECK(std::abs(T1.A(k) - T0.A(k)) <= 1e-10 * T0.A(k));
        for (int i = 0; i < c.K; ++i) CHECK(std::abs(T1.B(k, i) - T0.B(k, i)) <= 1e-10 * T0.A(k));
    }
}

TEST_CASE("closed-form moments agree with sample averages") {
    const SystemConfig c = tiny_config();
    const StatisticalCsi st = stats_for(c, 2);
    const PhaseConfig ph = random_phases(c.L, c.N(), 2);
    const RMat eta = random_eta(2, 2, 2);
    const ClosedFormTerms T = closed_form_terms(st, ph, PowerAllocation(eta));
    const int n = 100000;
    RVec sa = RVec::Zero(2), sa2 = RVec::Zero(2), sb = RVec::Zero(2), sb2 = RVec::Zero(2);
    for (int d = 0; d < n; ++d) {
        const EffectiveChannels h = effective_channel(sample_channels(st, Seed{31, static_cast<std::uint64_t>(d)}), ph);
        for (int k = 0; k < 2; ++k) {
            const int i = 1 - k;
            double q = 0.0;
            cplx p = 0.0;
            for (int s = 0; s < 2; ++s) {
                q += std::sqrt(eta(k, s)) * h.at(k, s).squaredNorm();
                p += std::sqrt(eta(i, s)) * h.at(i, s).dot(h.at(k, s));
            }
            sa(k) += q * q;
            sa2(k) += q * q * q * q;
            sb(k) += std::norm(p);
            sb2(k) += std::norm(p) * std::norm(p);
        }
    }
    for (int k = 0; k < 2; ++k) {
        const double ma = sa(k) / n, mb = sb(k) / n;
        const double se_a = std::sqrt((sa2(k) / n - ma * ma) / n);
        const double se_b = std::sqrt((sb2(k) / n - mb * mb) / n);
        CHECK(std::abs(ma - T.A(k)) <= 3 * se_a);
        CHECK(std::abs(mb - T.B(k, 1 - k)) <= 3 * se_b);
    }
}

TEST_CASE("monte carlo rate") {
    SystemConfig c = tiny_config();
    const StatisticalCsi st0 = stats_for(c, 5);
    const PhaseConfig ph = random_phases(c.L, c.N(), 5);
    const PowerAllocation eta(random_eta(2, 2, 5));
    const auto mu = weights_of(c);

    SUBCASE("deterministic channel has zero spread") {
        StatisticalCsi st = st0;
        for (auto* v : {&st.bs_ris, &st.ris_ue, &st.direct})
            for (auto& l : *v) l.b = 0.0;
        st.refresh_aggregates();
        const RateReport ref = instantaneous_rate(mean_channels(st), ph, eta, c);
        for (auto mode : {ErgodicMode::TrueErgodic, ErgodicMode::MomentRatio}) {
            const MonteCarloRate mc = monte_carlo_rate(st, ph, eta, 50, Seed{1, 2}, mode, mu, c.N0);
            for (int k = 0; k < 2; ++k) {
                CHECK(mc.rate(k) == doctest::Approx(ref.rate(k)).epsilon(1e-12));
                CHECK(mc.se(k) <= 1e-9 * ref.rate(k));
            }
        }
    }
    SUBCASE("deterministic per seed and shrinking error") {
        const MonteCarloRate a = monte_carlo_rate(st0, ph, eta, 2000, Seed{9, 1}, ErgodicMode::TrueErgodic, mu, c.N0);
        const MonteCarloRate b = monte_carlo_rate(st0, ph, eta, 2000, Seed{9, 1}, ErgodicMode::TrueErgodic, mu, c.N0);
        const MonteCarloRate d = monte_carlo_rate(st0, ph, eta, 4000, Seed{9, 1}, ErgodicMode::TrueErgodic, mu, c.N0);
        CHECK(a.wsr == b.wsr);
        CHECK(d.wsr_se / a.wsr_se == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.2));
    }
    SUBCASE("moment ratio tracks the closed form") {
        const MonteCarloRate mc = monte_carlo_rate(st0, ph, eta, 10000, Seed{3, 3}, ErgodicMode::MomentRatio, mu, c.N0);
        const double cf = closed_form_wsr(st0, ph, eta, mu, c.N0);
        CHECK(std::abs(cf - mc.wsr) <= 0.03 * mc.wsr);
    }
}

TEST_CASE("statistical equal power splits each budget") {
    const SystemConfig c = tiny_config();
    const StatisticalCsi st = stats_for(c, 7);
    const PhaseConfig ph = random_phases(c.L, c.N(), 7);
    const PowerAllocation eta = statistical_equal_power(st, ph, c.P_max);
    const ClosedFormTerms T = closed_form_terms(st, ph, eta);
    for (int s = 0; s < c.S; ++s) {
        double used = 0.0;
        for (int k = 0; k < c.K; ++k) {
            const double g = T.hb(k, s).squaredNorm() + c.M * st.chi(k, s);
            used += eta.eta(k, s) * g;
        }
        CHECK(used == doctest::Approx(c.P_max).epsilon(1e-12));
    }
}
