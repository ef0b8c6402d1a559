#pragma once

#include <string>
#include <vector>

#include "cfris/channel.hpp"

namespace cfris {

struct RateReport {
    RVec sinr;
    RVec rate;          // bits/s/Hz
    RVec signal;        // |sum_s sqrt(eta_ks) ||h_ks||^2|^2
    RVec interference;  // sum_{i != k} |sum_s sqrt(eta_is) h_ks^T h_is^*|^2
    double noise = 0.0;
    double wsr = 0.0;
};

std::vector<double> weights_of(const SystemConfig& cfg);

RateReport instantaneous_rate(const EffectiveChannels& h, const PowerAllocation& eta, const std::vector<double>& mu,
                              double N0);
RateReport instantaneous_rate(const ChannelRealization& real, const PhaseConfig& phases, const PowerAllocation& eta,
                              const SystemConfig& cfg);

enum class ErgodicMode { TrueErgodic, MomentRatio };

struct MonteCarloRate {
    RVec rate;
    RVec se;
    double wsr = 0.0;
    double wsr_se = 0.0;
    RVec mean_signal;        // sample mean of the numerator
    RVec mean_interference;  // sample mean of the interference sum
};

MonteCarloRate monte_carlo_rate(const StatisticalCsi& stats, const PhaseConfig& phases, const PowerAllocation& eta,
                                int n_samples, Seed seed, ErgodicMode mode, const std::vector<double>& mu, double N0);

// Named pieces of the signal moment E|sum_s sqrt(eta_ks) ||h_ks||^2|^2.
struct SignalTerms {
    double quartic = 0;       // q^2, q = sum_s sqrt(eta) ||hbar||^2
    double mean_scatter = 0;  // 2 M q sum_t sqrt(eta_t) chi_t
    double ris_cross = 0;     // 2 sum_l b_r^2 ||nu_l||^2
    double trace = 0;         // sum_st w ||X_st||_F^2
    double constant = 0;      // M^2 (sum_s sqrt(eta) chi)^2
    double nlos = 0;          // pure scattering fourth moments
    double theta_cross = 0;   // mean / surface cross terms
    double single_bs = 0;     // same-BS conditional variance
    double total() const {
        return quartic + mean_scatter + ris_cross + trace + constant + nlos + theta_cross + single_bs;
    }
};

// Named pieces of the interference moment E|sum_s sqrt(eta_is) h_ks^T h_is^*|^2.
struct InterferenceTerms {
    double quartic = 0;      // |p|^2
    double ris_cross = 0;
    double trace = 0;
    double rho_cross = 0;    // 2 M Re(p rho)
    double nlos = 0;
    double theta_cross = 0;
    double rho_scatter = 0;  // M^2 |rho|^2 plus scattering products
    double single_bs = 0;
    double total() const {
        return quartic + ris_cross + trace + rho_cross + nlos + theta_cross + rho_scatter + single_bs;
    }
};

struct ClosedFormTerms {
    int K = 0, S = 0;
    RVec A;                       // K
    RMat B;                       // K x K, B(k,i) with zero diagonal
    RVec numerator;               // sum_s sqrt(eta_ks)(||hbar_ks||^2 + M chi_ks)
    std::vector<CVec> hbar;       // [k*S+s]
    std::vector<SignalTerms> a_terms;
    std::vector<InterferenceTerms> b_terms;  // [k*K+i]
    const CVec& hb(int k, int s) const { return hbar[static_cast<std::size_t>(k * S + s)]; }
    double interference(int k) const { return B.row(k).sum(); }
};

// Theta-independent Gram products Gbar_ls^T Gbar_lt^* (M x M), cached per statistics.
struct GramCache {
    int L = 0, S = 0;
    std::vector<CMat> gram;  // [(l*S+s)*S+t]
    const CMat& at(int l, int s, int t) const { return gram[static_cast<std::size_t>((l * S + s) * S + t)]; }
};
GramCache build_gram_cache(const StatisticalCsi& stats);

// Mean effective channel hbar_ks under the phases.
std::vector<CVec> mean_effective(const StatisticalCsi& stats, const CVec& u);

ClosedFormTerms closed_form_terms(const StatisticalCsi& stats, const PhaseConfig& phases, const PowerAllocation& eta);
ClosedFormTerms closed_form_terms(const StatisticalCsi& stats, const GramCache& gram, const CVec& u,
                                  const PowerAllocation& eta);

RVec closed_form_rate(const ClosedFormTerms& terms, double N0);
double weighted_sum(const RVec& rate, const std::vector<double>& mu);
double closed_form_wsr(const StatisticalCsi& stats, const PhaseConfig& phases, const PowerAllocation& eta,
                       const std::vector<double>& mu, double N0);

// Scattering-only special case. Rejects statistics that carry any line-of-sight power.
RVec nlos_rate(const StatisticalCsi& stats, const PowerAllocation& eta, double N0);

// Equal split of each BS budget using the statistical gain ||hbar||^2 + M chi under the phases.
PowerAllocation statistical_equal_power(const StatisticalCsi& stats, const PhaseConfig& phases, double P_max);

struct MomentRow {
    std::string identity;
    double analytic = 0;
    double empirical = 0;
    double se = 0;
    double z = 0;
};

// Compares each moment identity of the channel decomposition against sample averages.
// Uses user 0 as the served user and user 1 (when K > 1) as the interferer; eta defaults to all ones.
std::vector<MomentRow> moment_oracle(const StatisticalCsi& stats, const PhaseConfig& phases, int n_samples, Seed seed,
                                     const RMat& eta = RMat());

std::string moment_csv(const std::vector<MomentRow>& rows);

}  // namespace cfris
