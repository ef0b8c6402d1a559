#include "cfris/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cfris/channel.hpp"

namespace cfris {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<double> parse_list(const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

}  // namespace

void SystemConfig::validate() const {
    if (S < 1 || M < 1 || L < 0 || N_r < 1 || N_c < 1 || K < 1)
        throw std::invalid_argument("config: counts must be positive (L may be 0)");
    if (!(P_max > 0) || !(N0 > 0) || !(C0 > 0))
        throw std::invalid_argument("config: P_max, N0 and C0 must be positive");
    if (!(alpha_D > 0) || !(alpha_BR > 0) || !(alpha_RU > 0))
        throw std::invalid_argument("config: path-loss exponents must be positive");
    if (K_bs_ris < 0 || K_ris_ue < 0 || K_direct < 0)
        throw std::invalid_argument("config: Rician factors must be nonnegative");
    if (!mu.empty()) {
        if (static_cast<int>(mu.size()) != K) throw std::invalid_argument("config: mu needs K entries");
        for (double w : mu)
            if (!(w > 0)) throw std::invalid_argument("config: weights must be positive");
    }
    if (!(area_side > 0)) throw std::invalid_argument("config: area_side must be positive");
}

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

SystemConfig default_config() {
    SystemConfig c;
    const double kf = 3.0 + std::sqrt(12.0);
    c.K_bs_ris = kf;
    c.K_ris_ue = kf;
    c.K_direct = kf;
    c.P_max = dbm_to_watt(10.0);
    c.N0 = dbm_to_watt(-80.0);
    c.mu.assign(static_cast<std::size_t>(c.K), 1.0);
    return c;
}

SystemConfig parse_config(const std::string& text, SystemConfig c) {
    std::stringstream in(text);
    std::string line;
    int lineno = 0;
    bool mu_set = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        auto num = [&] { return std::stod(val); };
        auto cnt = [&] { return std::stoi(val); };
        if (key == "S") c.S = cnt();
        else if (key == "M") c.M = cnt();
        else if (key == "L") c.L = cnt();
        else if (key == "N_r") c.N_r = cnt();
        else if (key == "N_c") c.N_c = cnt();
        else if (key == "K") c.K = cnt();
        else if (key == "P_max") c.P_max = dbm_to_watt(num());
        else if (key == "N0") c.N0 = dbm_to_watt(num());
        else if (key == "mu") { c.mu = parse_list(val); mu_set = true; }
        else if (key == "C0") c.C0 = num();
        else if (key == "alpha_D") c.alpha_D = num();
        else if (key == "alpha_BR") c.alpha_BR = num();
        else if (key == "alpha_RU") c.alpha_RU = num();
        else if (key == "K_bs_ris") c.K_bs_ris = num();
        else if (key == "K_ris_ue") c.K_ris_ue = num();
        else if (key == "K_direct") c.K_direct = num();
        else if (key == "d1_over_lambda") c.d1_over_lambda = num();
        else if (key == "d2_over_lambda") c.d2_over_lambda = num();
        else if (key == "area_side") c.area_side = num();
        else if (key == "h_bs") c.h_bs = num();
        else if (key == "h_ris") c.h_ris = num();
        else if (key == "h_ue") c.h_ue = num();
        else if (key == "angle_mode") {
            if (val == "geometric") c.angle_mode = AngleMode::Geometric;
            else if (val == "uniform-random") c.angle_mode = AngleMode::UniformRandom;
            else throw std::invalid_argument("config: unknown angle_mode '" + val + "'");
        } else {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    if (!mu_set && static_cast<int>(c.mu.size()) != c.K) c.mu.assign(static_cast<std::size_t>(c.K), 1.0);
    c.validate();
    return c;
}

SystemConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

LayoutSpec LayoutSpec::cluster_at(double x, double y) {
    LayoutSpec s;
    s.kind = Kind::UeClusterAt;
    s.cluster_x = x;
    s.cluster_y = y;
    return s;
}

std::vector<std::array<double, 2>> ring_bs_positions(const SystemConfig& cfg) {
    std::vector<std::array<double, 2>> out;
    const double c = cfg.area_side / 2.0;
    const double r = 0.4 * cfg.area_side;
    for (int s = 0; s < cfg.S; ++s) {
        const double a = 2.0 * kPi * s / cfg.S + kPi / 2.0;
        out.push_back({c + r * std::cos(a), c + r * std::sin(a)});
    }
    return out;
}

std::vector<std::array<double, 2>> line_ris_positions(const SystemConfig& cfg) {
    std::vector<std::array<double, 2>> out;
    for (int l = 0; l < cfg.L; ++l)
        out.push_back({cfg.area_side * (l + 1.0) / (cfg.L + 1.0), 0.6 * cfg.area_side});
    return out;
}

NetworkGeometry place_nodes(const SystemConfig& cfg, const LayoutSpec& layout, Seed seed) {
    cfg.validate();
    NetworkGeometry g;
    const double A = cfg.area_side;
    auto check = [&](double x, double y) {
        if (x < 0 || x > A || y < 0 || y > A)
            throw std::invalid_argument("layout: coordinate (" + std::to_string(x) + ", " + std::to_string(y) +
                                        ") outside the deployment square");
    };
    auto put = [&](std::vector<Point3>& dst, const std::vector<std::array<double, 2>>& src, std::size_t want,
                   double h, const char* what) {
        if (src.size() != want)
            throw std::invalid_argument(std::string("layout: wrong number of ") + what + " coordinates");
        for (const auto& p : src) {
            check(p[0], p[1]);
            dst.push_back({p[0], p[1], h});
        }
    };

    switch (layout.kind) {
        case LayoutSpec::Kind::UniformRandom: {
            auto eng = make_engine(seed);
            std::uniform_real_distribution<double> U(0.0, A);
            auto draw = [&](std::vector<Point3>& dst, int n, double h) {
                for (int i = 0; i < n; ++i) {
                    const double x = U(eng);
                    const double y = U(eng);
                    dst.push_back({x, y, h});
                }
            };
            draw(g.bs, cfg.S, cfg.h_bs);
            draw(g.ris, cfg.L, cfg.h_ris);
            draw(g.ue, cfg.K, cfg.h_ue);
            break;
        }
        case LayoutSpec::Kind::Fixed:
            put(g.bs, layout.bs_xy, static_cast<std::size_t>(cfg.S), cfg.h_bs, "BS");
            put(g.ris, layout.ris_xy, static_cast<std::size_t>(cfg.L), cfg.h_ris, "RIS");
            put(g.ue, layout.ue_xy, static_cast<std::size_t>(cfg.K), cfg.h_ue, "UE");
            break;
        case LayoutSpec::Kind::UeClusterAt: {
            put(g.bs, layout.bs_xy.empty() ? ring_bs_positions(cfg) : layout.bs_xy, static_cast<std::size_t>(cfg.S),
                cfg.h_bs, "BS");
            put(g.ris, layout.ris_xy.empty() ? line_ris_positions(cfg) : layout.ris_xy,
                static_cast<std::size_t>(cfg.L), cfg.h_ris, "RIS");
            const double o = layout.cluster_offset;
            const std::array<std::array<double, 2>, 4> corners{
                {{-o, -o}, {-o, o}, {o, -o}, {o, o}}};
            for (int k = 0; k < cfg.K; ++k) {
                const auto& c = corners[static_cast<std::size_t>(k % 4)];
                const double ring = 1.0 + k / 4;  // extra users spread outward
                const double x = layout.cluster_x + ring * c[0];
                const double y = layout.cluster_y + ring * c[1];
                check(x, y);
                g.ue.push_back({x, y, cfg.h_ue});
            }
            break;
        }
    }

    std::vector<const Point3*> all;
    for (auto* v : {&g.bs, &g.ris, &g.ue})
        for (const auto& p : *v) all.push_back(&p);
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            if (distance(*all[i], *all[j]) <= 0.0) throw std::invalid_argument("layout: two nodes coincide");
    return g;
}

double distance(const Point3& a, const Point3& b) {
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

double path_loss(double d, double alpha, double C0) {
    if (!(d > 0)) throw std::invalid_argument("path_loss: distance must be positive");
    return C0 * std::pow(d, -alpha);
}

LinkStatistics make_link(double beta, double K) {
    LinkStatistics s;
    s.beta = beta;
    s.K = K;
    s.a = std::sqrt(beta * K / (K + 1.0));
    s.b = std::sqrt(beta / (K + 1.0));
    return s;
}

double StatisticalCsi::gamma(int k, int s) const {
    const double bd = dl(k, s).b;
    return bd * bd + N * (alpha1(k, s) + alpha3(k, s));
}

void StatisticalCsi::refresh_aggregates() {
    alpha1 = RMat::Zero(K, S);
    alpha2 = RMat::Zero(K, S);
    alpha3 = RMat::Zero(K, S);
    chi = RMat::Zero(K, S);
    for (int k = 0; k < K; ++k)
        for (int s = 0; s < S; ++s) {
            for (int l = 0; l < L; ++l) {
                const auto& g = br(l, s);
                const auto& r = ru(l, k);
                alpha1(k, s) += g.b * g.b * r.a * r.a;
                alpha2(k, s) += g.a * g.a * r.b * r.b;
                alpha3(k, s) += g.b * g.b * r.b * r.b;
            }
            const double bd = dl(k, s).b;
            chi(k, s) = bd * bd + N * (alpha1(k, s) + alpha2(k, s) + alpha3(k, s));
        }
}

namespace {

struct Angles {
    double azimuth;
    double zenith;
};

// Direction from `from` towards `to`.
Angles direction(const Point3& from, const Point3& to) {
    const double dx = to[0] - from[0];
    const double dy = to[1] - from[1];
    const double dz = to[2] - from[2];
    const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
    return {std::atan2(dy, dx), std::acos(std::clamp(dz / d, -1.0, 1.0))};
}

}  // namespace

StatisticalCsi build_statistics(const SystemConfig& cfg, const NetworkGeometry& geom, Seed angle_seed) {
    cfg.validate();
    if (static_cast<int>(geom.bs.size()) != cfg.S || static_cast<int>(geom.ris.size()) != cfg.L ||
        static_cast<int>(geom.ue.size()) != cfg.K)
        throw std::invalid_argument("build_statistics: geometry does not match config counts");

    StatisticalCsi st;
    st.S = cfg.S;
    st.M = cfg.M;
    st.L = cfg.L;
    st.N = cfg.N();
    st.K = cfg.K;

    auto eng = make_engine(angle_seed);
    std::uniform_real_distribution<double> U(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> Uz(0.0, kPi);
    const bool rnd = cfg.angle_mode == AngleMode::UniformRandom;
    auto angles = [&](const Point3& from, const Point3& to) {
        return rnd ? Angles{U(eng), Uz(eng)} : direction(from, to);
    };

    for (int l = 0; l < cfg.L; ++l)
        for (int s = 0; s < cfg.S; ++s) {
            const auto& bs = geom.bs[static_cast<std::size_t>(s)];
            const auto& ris = geom.ris[static_cast<std::size_t>(l)];
            st.bs_ris.push_back(make_link(path_loss(distance(bs, ris), cfg.alpha_BR, cfg.C0), cfg.K_bs_ris));
            const Angles arr = angles(ris, bs);
            const Angles dep = angles(bs, ris);
            const CVec aN = steering_upa(cfg.N_r, cfg.N_c, arr.azimuth, arr.zenith, cfg.d2_over_lambda);
            const CVec aM = steering_ula(cfg.M, dep.azimuth, cfg.d1_over_lambda);
            st.G_los.push_back(aN * aM.transpose());
        }
    for (int l = 0; l < cfg.L; ++l)
        for (int k = 0; k < cfg.K; ++k) {
            const auto& ris = geom.ris[static_cast<std::size_t>(l)];
            const auto& ue = geom.ue[static_cast<std::size_t>(k)];
            st.ris_ue.push_back(make_link(path_loss(distance(ris, ue), cfg.alpha_RU, cfg.C0), cfg.K_ris_ue));
            const Angles dep = angles(ris, ue);
            st.hr_los.push_back(steering_upa(cfg.N_r, cfg.N_c, dep.azimuth, dep.zenith, cfg.d2_over_lambda));
        }
    for (int k = 0; k < cfg.K; ++k)
        for (int s = 0; s < cfg.S; ++s) {
            const auto& bs = geom.bs[static_cast<std::size_t>(s)];
            const auto& ue = geom.ue[static_cast<std::size_t>(k)];
            st.direct.push_back(make_link(path_loss(distance(bs, ue), cfg.alpha_D, cfg.C0), cfg.K_direct));
            const Angles dep = angles(bs, ue);
            st.hd_los.push_back(steering_ula(cfg.M, dep.azimuth, cfg.d1_over_lambda));
        }
    st.refresh_aggregates();
    return st;
}

}  // namespace cfris
