#pragma once

#include <vector>

#include "cfris/scenario.hpp"

namespace cfris {

CVec steering_ula(int M, double theta, double spacing_over_lambda);
// Row-major stacking: element (n_r, n_c) sits at index n_r * N_c + n_c.
CVec steering_upa(int N_r, int N_c, double theta, double phi, double spacing_over_lambda);

class PhaseConfig {
public:
    PhaseConfig() = default;
    PhaseConfig(int L, int N);
    // Projects every entry onto the unit circle; zero entries map to 1.
    explicit PhaseConfig(const CVec& raw, int L, int N);

    static PhaseConfig from_angles(const RVec& angles, int L, int N);

    const CVec& u() const { return u_; }
    int L() const { return L_; }
    int N() const { return N_; }
    // Diagonal of Theta_l
    CVec theta(int l) const { return u_.segment(static_cast<Eigen::Index>(l) * N_, N_); }
    CMat Theta(int l) const { return theta(l).asDiagonal(); }
    CMat Phi() const { return u_.asDiagonal(); }

private:
    CVec u_;
    int L_ = 0;
    int N_ = 0;
};

CVec project_unit(const CVec& v);

struct ChannelRealization {
    int S = 0, M = 0, L = 0, N = 0, K = 0;
    std::vector<CMat> G;   // [l*S+s], N x M
    std::vector<CVec> hr;  // [l*K+k], N
    std::vector<CVec> hd;  // [k*S+s], M

    const CMat& Gls(int l, int s) const { return G[static_cast<std::size_t>(l * S + s)]; }
    const CVec& hrlk(int l, int k) const { return hr[static_cast<std::size_t>(l * K + k)]; }
    const CVec& hdks(int k, int s) const { return hd[static_cast<std::size_t>(k * S + s)]; }
};

// Effective per-(user, BS) channels, stored [k*S+s].
struct EffectiveChannels {
    int S = 0, M = 0, K = 0;
    std::vector<CVec> h;
    CVec phases;  // phase vector these were assembled under

    const CVec& at(int k, int s) const { return h[static_cast<std::size_t>(k * S + s)]; }
    CVec& at(int k, int s) { return h[static_cast<std::size_t>(k * S + s)]; }
    // K x S matrix of ||h_ks||^2
    RMat gains() const;
};

struct PowerAllocation {
    RMat eta;  // K x S, nonnegative

    PowerAllocation() = default;
    explicit PowerAllocation(RMat e) : eta(std::move(e)) {}
    // Per-BS used power sum_k eta_ks ||h_ks||^2
    RVec used_power(const EffectiveChannels& h) const;
    bool feasible(const EffectiveChannels& h, double P_max, double rel_tol = 1e-6) const;
};

ChannelRealization sample_channels(const StatisticalCsi& stats, Seed seed);
// Deterministic LoS-only realization a * LoS (the mean channel).
ChannelRealization mean_channels(const StatisticalCsi& stats);

EffectiveChannels effective_channel(const ChannelRealization& real, const PhaseConfig& phases);

std::vector<CVec> mr_precoder(const EffectiveChannels& h, const PowerAllocation& eta);

}  // namespace cfris
