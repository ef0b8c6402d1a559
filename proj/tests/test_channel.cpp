#include <doctest.h>

#include <cmath>
#include <random>

#include "cfris/channel.hpp"

using namespace cfris;

namespace {

StatisticalCsi small_stats(std::uint64_t seed, int L = 2) {
    SystemConfig c = default_config();
    c.S = 2;
    c.M = 3;
    c.L = L;
    c.N_r = 2;
    c.N_c = 2;
    c.K = 2;
    c.mu.assign(2, 1.0);
    return build_statistics(c, place_nodes(c, LayoutSpec::uniform(), Seed{seed, 0}));
}

void check_close(const CVec& a, const CVec& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(std::abs(a(i) - b(i)) <= tol);
}

CVec random_cvec(std::mt19937_64& eng, int n) {
    std::normal_distribution<double> g;
    CVec v(n);
    for (int i = 0; i < n; ++i) v(i) = cplx(g(eng), g(eng));
    return v;
}

}  // namespace

TEST_CASE("linear array response") {
    check_close(steering_ula(4, 0.0, 0.5), CVec::Ones(4), 1e-15);
    CVec two(2);
    two << 1.0, -1.0;
    check_close(steering_ula(2, kPi / 2, 0.5), two, 1e-12);
    CVec four(4);
    four << cplx(1, 0), cplx(0, 1), cplx(-1, 0), cplx(0, -1);
    check_close(steering_ula(4, kPi / 6, 0.5), four, 1e-12);
}

TEST_CASE("planar array response") {
    check_close(steering_upa(3, 4, 0.7, 0.0, 0.5), CVec::Ones(12), 1e-15);
    CVec two(2);
    two << 1.0, -1.0;
    check_close(steering_upa(2, 1, 0.0, kPi / 2, 0.5), two, 1e-12);

    const CVec a = steering_upa(2, 2, kPi / 4, kPi / 2, 0.5);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            const double ph = kPi * (r + c) / std::sqrt(2.0);
            CHECK(std::abs(a(r * 2 + c) - cplx(std::cos(ph), std::sin(ph))) <= 1e-12);
        }
}

TEST_CASE("array responses are unit modulus with a unit first entry") {
    std::mt19937_64 eng(8);
    std::uniform_real_distribution<double> ang(-kPi, kPi);
    for (int i = 0; i < 50; ++i) {
        const CVec a = steering_ula(7, ang(eng), 0.5);
        const CVec b = steering_upa(3, 5, ang(eng), ang(eng), 0.5);
        CHECK(a(0) == cplx(1.0, 0.0));
        CHECK(b(0) == cplx(1.0, 0.0));
        for (Eigen::Index j = 0; j < a.size(); ++j) CHECK(std::abs(std::abs(a(j)) - 1.0) <= 1e-12);
        for (Eigen::Index j = 0; j < b.size(); ++j) CHECK(std::abs(std::abs(b(j)) - 1.0) <= 1e-12);
    }
}

TEST_CASE("phase projection") {
    std::mt19937_64 eng(9);
    const CVec raw = random_cvec(eng, 12);
    const PhaseConfig p(raw, 3, 4);
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
        CHECK(std::abs(std::abs(p.u()(i)) - 1.0) <= 1e-9);
        CHECK(std::abs(std::arg(p.u()(i)) - std::arg(raw(i))) <= 1e-12);
    }
    CHECK(p.theta(1).size() == 4);
    CHECK(p.Theta(2).rows() == 4);
    CHECK(p.Phi().rows() == 12);
    CVec z = CVec::Zero(2);
    CHECK(PhaseConfig(z, 1, 2).u()(0) == cplx(1.0, 0.0));
    CHECK_THROWS_AS(PhaseConfig(raw, 2, 4), std::invalid_argument);
    CHECK(PhaseConfig(2, 3).u() == CVec::Ones(6));
}

TEST_CASE("degenerate sampling equals the mean channel") {
    StatisticalCsi st = small_stats(3);
    for (auto* v : {&st.bs_ris, &st.ris_ue, &st.direct})
        for (auto& l : *v) l.b = 0.0;
    const ChannelRealization r = sample_channels(st, Seed{4, 4});
    const ChannelRealization m = mean_channels(st);
    for (std::size_t i = 0; i < r.G.size(); ++i) CHECK((r.G[i] - m.G[i]).norm() == 0.0);
    for (std::size_t i = 0; i < r.hr.size(); ++i) CHECK((r.hr[i] - m.hr[i]).norm() == 0.0);
    for (std::size_t i = 0; i < r.hd.size(); ++i) CHECK((r.hd[i] - m.hd[i]).norm() == 0.0);
}

TEST_CASE("sampling is deterministic per seed") {
    const StatisticalCsi st = small_stats(3);
    const ChannelRealization a = sample_channels(st, Seed{1, 7});
    const ChannelRealization b = sample_channels(st, Seed{1, 7});
    const ChannelRealization c = sample_channels(st, Seed{1, 8});
    CHECK(a.G[0] == b.G[0]);
    CHECK(a.hd[1] == b.hd[1]);
    CHECK(a.G[0] != c.G[0]);
}

TEST_CASE("sample moments of the surface channel") {
    const StatisticalCsi st = small_stats(6);
    const int n = 10000;
    const auto& link = st.br(1, 0);
    const CMat target = link.a * st.G(1, 0);
    CMat sum = CMat::Zero(target.rows(), target.cols());
    RMat sq = RMat::Zero(target.rows(), target.cols());
    for (int i = 0; i < n; ++i) {
        const ChannelRealization r = sample_channels(st, Seed{77, static_cast<std::uint64_t>(i)});
        const CMat& G = r.Gls(1, 0);
        sum += G;
        sq += (G - target).cwiseAbs2();
    }
    const CMat mean = sum / n;
    const double b2 = link.b * link.b;
    // each complex entry mean has per-part standard error b / sqrt(2n)
    const double se = link.b / std::sqrt(2.0 * n);
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
        CHECK(std::abs(mean(i).real() - target(i).real()) <= 4 * se);
        CHECK(std::abs(mean(i).imag() - target(i).imag()) <= 4 * se);
        CHECK(sq(i) / n == doctest::Approx(b2).epsilon(0.1));
    }
}

TEST_CASE("effective channel without surfaces") {
    const StatisticalCsi st = small_stats(2, 0);
    const ChannelRealization r = sample_channels(st, Seed{1, 1});
    const EffectiveChannels h = effective_channel(r, PhaseConfig(0, st.N));
    for (int k = 0; k < st.K; ++k)
        for (int s = 0; s < st.S; ++s) CHECK(h.at(k, s) == r.hdks(k, s));
}

TEST_CASE("effective channel with identity phases on one surface") {
    const StatisticalCsi st = small_stats(2, 1);
    const ChannelRealization r = sample_channels(st, Seed{1, 1});
    const EffectiveChannels h = effective_channel(r, PhaseConfig(1, st.N));
    for (int k = 0; k < st.K; ++k)
        for (int s = 0; s < st.S; ++s) {
            const CVec ref = (r.hrlk(0, k).transpose() * r.Gls(0, s)).transpose() + r.hdks(k, s);
            check_close(h.at(k, s), ref, 1e-14);
        }
}

TEST_CASE("effective channel matches a scalar loop") {
    const StatisticalCsi st = small_stats(4, 2);
    std::mt19937_64 eng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const ChannelRealization r = sample_channels(st, Seed{9, static_cast<std::uint64_t>(trial)});
        const PhaseConfig ph(random_cvec(eng, st.L * st.N), st.L, st.N);
        const EffectiveChannels h = effective_channel(r, ph);
        CHECK(h.phases == ph.u());
        for (int k = 0; k < st.K; ++k)
            for (int s = 0; s < st.S; ++s)
                for (int m = 0; m < st.M; ++m) {
                    cplx acc = r.hdks(k, s)(m);
                    for (int l = 0; l < st.L; ++l)
                        for (int n = 0; n < st.N; ++n)
                            acc += r.hrlk(l, k)(n) * ph.u()(l * st.N + n) * r.Gls(l, s)(n, m);
                    CHECK(std::abs(h.at(k, s)(m) - acc) <= 1e-12 * std::max(1e-30, std::abs(acc)) + 1e-300);
                }
    }
    const ChannelRealization r = sample_channels(st, Seed{9, 0});
    CHECK_THROWS_AS(effective_channel(r, PhaseConfig(1, st.N)), std::invalid_argument);
}

TEST_CASE("maximum-ratio precoder") {
    EffectiveChannels h;
    h.S = 1;
    h.M = 3;
    h.K = 2;
    CVec real_h(3);
    real_h << 1.0, -2.0, 0.5;
    std::mt19937_64 eng(5);
    h.h = {real_h, random_cvec(eng, 3)};
    RMat eta(2, 1);
    eta << 1.0, 0.0;
    const auto w = mr_precoder(h, PowerAllocation(eta));
    check_close(w[0], real_h, 0.0);
    CHECK(w[1].norm() == 0.0);

    for (int i = 0; i < 20; ++i) {
        h.h = {random_cvec(eng, 3), random_cvec(eng, 3)};
        RMat e(2, 1);
        e << std::abs(h.h[0](0)), std::abs(h.h[1](1));
        const auto ww = mr_precoder(h, PowerAllocation(e));
        for (int k = 0; k < 2; ++k)
            CHECK(ww[k].squaredNorm() == doctest::Approx(e(k, 0) * h.h[k].squaredNorm()).epsilon(1e-12));
    }
    RMat bad(2, 1);
    bad << 1.0, -1.0;
    CHECK_THROWS_AS(mr_precoder(h, PowerAllocation(bad)), std::invalid_argument);
}

TEST_CASE("power feasibility") {
    EffectiveChannels h;
    h.S = 2;
    h.M = 1;
    h.K = 1;
    h.h = {CVec::Constant(1, cplx(2.0, 0.0)), CVec::Constant(1, cplx(1.0, 0.0))};
    RMat e(1, 2);
    e << 0.25, 1.0;
    const PowerAllocation p(e);
    CHECK(p.used_power(h)(0) == doctest::Approx(1.0));
    CHECK(p.used_power(h)(1) == doctest::Approx(1.0));
    CHECK(p.feasible(h, 1.0));
    CHECK(!p.feasible(h, 0.99));
    e(0, 0) = -0.1;
    CHECK(!PowerAllocation(e).feasible(h, 10.0));
}
