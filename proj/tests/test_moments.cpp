#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include "cfris/rate.hpp"

using namespace cfris;

namespace {

SystemConfig small_config() {
    SystemConfig c = default_config();
    c.S = 2;
    c.M = 2;
    c.L = 2;
    c.N_r = 2;
    c.N_c = 2;
    c.K = 2;
    c.mu = {1.0, 1.0};
    return c;
}

const MomentRow& find(const std::vector<MomentRow>& rows, const std::string& name) {
    for (const auto& r : rows)
        if (r.identity == name) return r;
    FAIL("missing identity " << name);
    return rows.front();
}

}  // namespace

TEST_CASE("second-moment identities have the expected analytic values") {
    const SystemConfig c = small_config();
    const StatisticalCsi st = build_statistics(c, place_nodes(c, LayoutSpec::uniform(), Seed{4, 0}));
    const auto rows = moment_oracle(st, PhaseConfig(c.L, c.N()), 1000, Seed{4, 1});
    for (int s = 0; s < c.S; ++s) {
        const std::string tag = "[s=" + std::to_string(s) + "]";
        const double bd = st.dl(0, s).b;
        CHECK(find(rows, "A1.i E|x1|^2" + tag).analytic == doctest::Approx(c.M * bd * bd).epsilon(1e-12));
        double x4 = 0.0;
        for (int l = 0; l < c.L; ++l) x4 += st.ru(l, 0).b * st.ru(l, 0).b * st.br(l, s).b * st.br(l, s).b;
        CHECK(find(rows, "A1.iv E|x4|^2" + tag).analytic == doctest::Approx(c.M * c.N() * x4).epsilon(1e-12));
    }
}

TEST_CASE("moment identities agree with sample averages") {
    const SystemConfig c = small_config();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const StatisticalCsi st = build_statistics(c, place_nodes(c, LayoutSpec::uniform(), Seed{seed, 0}),
                                                   Seed{seed, 2});
        auto eng = make_engine(Seed{seed, 3});
        std::uniform_real_distribution<double> U(0.0, 2.0 * kPi);
        RVec ang(c.L * c.N());
        for (int i = 0; i < ang.size(); ++i) ang(i) = U(eng);
        const auto rows = moment_oracle(st, PhaseConfig::from_angles(ang, c.L, c.N()), 10000, Seed{seed, 4});
        CHECK(rows.size() >= 15);
        for (const auto& r : rows) {
            INFO(r.identity << " seed " << seed);
            CHECK(r.se > 0.0);
            CHECK(std::abs(r.empirical - r.analytic) <= 3.0 * r.se);
        }
    }
}

TEST_CASE("moment table csv") {
    std::vector<MomentRow> rows{{"x", 1.0, 1.5, 0.25, 2.0}};
    const std::string csv = moment_csv(rows);
    CHECK(csv.rfind("identity,analytic,empirical,se,z\n", 0) == 0);
    CHECK(csv.find("\"x\",1,1.5,0.25,2") != std::string::npos);
}
