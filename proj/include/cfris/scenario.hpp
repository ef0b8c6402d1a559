#pragma once

#include <array>
#include <string>
#include <vector>

#include "cfris/types.hpp"

namespace cfris {

enum class AngleMode { Geometric, UniformRandom };

struct SystemConfig {
    int S = 3;   // base stations
    int M = 4;   // antennas per BS
    int L = 3;   // surfaces
    int N_r = 8;
    int N_c = 8;
    int K = 4;   // users
    double P_max = 0.01;  // W
    double N0 = 1e-11;    // W
    std::vector<double> mu;  // per-user weights; empty means all ones
    double C0 = 1e-3;
    double alpha_D = 3.5;
    double alpha_BR = 2.2;
    double alpha_RU = 2.8;
    double K_bs_ris = 0.0;
    double K_ris_ue = 0.0;
    double K_direct = 0.0;
    double d1_over_lambda = 0.5;
    double d2_over_lambda = 0.5;
    double area_side = 100.0;
    double h_bs = 10.0;
    double h_ris = 5.0;
    double h_ue = 1.5;
    AngleMode angle_mode = AngleMode::Geometric;

    int N() const { return N_r * N_c; }
    double weight(int k) const { return mu.empty() ? 1.0 : mu.at(static_cast<std::size_t>(k)); }
    void validate() const;
};

SystemConfig default_config();
double dbm_to_watt(double dbm);

// Flat "key = value" files. Powers are read in dBm, everything else as-is.
SystemConfig load_config(const std::string& path);
SystemConfig parse_config(const std::string& text, SystemConfig base = default_config());

using Point3 = std::array<double, 3>;

struct NetworkGeometry {
    std::vector<Point3> bs;
    std::vector<Point3> ris;
    std::vector<Point3> ue;
};

struct LayoutSpec {
    enum class Kind { UniformRandom, Fixed, UeClusterAt } kind = Kind::UniformRandom;
    // Planar coordinates for Fixed; for UeClusterAt the BS/RIS lists may be left
    // empty to use the built-in ring/line placement.
    std::vector<std::array<double, 2>> bs_xy, ris_xy, ue_xy;
    double cluster_x = 50.0;
    double cluster_y = 50.0;
    double cluster_offset = 2.0;

    static LayoutSpec uniform() { return {}; }
    static LayoutSpec cluster_at(double x, double y);
};

NetworkGeometry place_nodes(const SystemConfig& cfg, const LayoutSpec& layout, Seed seed);

// Built-in deterministic BS/RIS placement used by cluster layouts.
std::vector<std::array<double, 2>> ring_bs_positions(const SystemConfig& cfg);
std::vector<std::array<double, 2>> line_ris_positions(const SystemConfig& cfg);

double path_loss(double d, double alpha, double C0);
double distance(const Point3& a, const Point3& b);

struct LinkStatistics {
    double beta = 0.0;
    double K = 0.0;
    double a = 0.0;
    double b = 0.0;
};

LinkStatistics make_link(double beta, double K);

struct StatisticalCsi {
    int S = 0, M = 0, L = 0, N = 0, K = 0;
    // indexed [l * S + s]
    std::vector<LinkStatistics> bs_ris;
    std::vector<CMat> G_los;  // N x M
    // indexed [l * K + k]
    std::vector<LinkStatistics> ris_ue;
    std::vector<CVec> hr_los;  // N
    // indexed [k * S + s]
    std::vector<LinkStatistics> direct;
    std::vector<CVec> hd_los;  // M
    RMat alpha1, alpha2, alpha3, chi;  // K x S

    const LinkStatistics& br(int l, int s) const { return bs_ris[static_cast<std::size_t>(l * S + s)]; }
    const LinkStatistics& ru(int l, int k) const { return ris_ue[static_cast<std::size_t>(l * K + k)]; }
    const LinkStatistics& dl(int k, int s) const { return direct[static_cast<std::size_t>(k * S + s)]; }
    const CMat& G(int l, int s) const { return G_los[static_cast<std::size_t>(l * S + s)]; }
    const CVec& hr(int l, int k) const { return hr_los[static_cast<std::size_t>(l * K + k)]; }
    const CVec& hd(int k, int s) const { return hd_los[static_cast<std::size_t>(k * S + s)]; }
    // gamma_ks = b_d^2 + N(alpha1 + alpha3)
    double gamma(int k, int s) const;

    void refresh_aggregates();
};

StatisticalCsi build_statistics(const SystemConfig& cfg, const NetworkGeometry& geom, Seed angle_seed = {});

}  // namespace cfris
