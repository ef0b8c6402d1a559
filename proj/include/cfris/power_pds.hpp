#pragma once

#include <string>
#include <vector>

#include "cfris/rate.hpp"

namespace cfris {

// Stacked square-root powers, user-major: index k*S + s holds sqrt(eta_ks).
RVec eta_bar_of(const PowerAllocation& eta);
PowerAllocation from_eta_bar(const RVec& eta_bar, int K, int S);

// eta_ks = P_max / (K ||h_ks||^2); zero where the channel vanishes.
PowerAllocation equal_power(const EffectiveChannels& h, double P_max);
// Scales each BS block down onto its budget when it is exceeded.
PowerAllocation scale_to_budget(const EffectiveChannels& h, const PowerAllocation& eta, double P_max);

RVec compute_gamma(const EffectiveChannels& h, const PowerAllocation& eta, double N0);

RVec dual_transform_eps(const RVec& gamma);
// sum_k mu_k [ln(1+eps) - eps + (1+eps) gamma/(1+gamma)] / ln 2; equals the weighted sum-rate at eps = gamma.
double dual_transform_objective(const RVec& eps, const RVec& gamma, const std::vector<double>& mu);

CVec quadratic_transform_y(const EffectiveChannels& h, const PowerAllocation& eta, const RVec& eps,
                           const std::vector<double>& mu, double N0);
// sum_k { 2 sqrt(mu(1+eps)) Re(y^* signal_k) - |y|^2 (sum_i |interference_ki|^2 + N0) }
double quadratic_transform_objective(const EffectiveChannels& h, const PowerAllocation& eta, const RVec& eps,
                                     const CVec& y, const std::vector<double>& mu, double N0);

struct QcqpData {
    CMat Xi;                // KS x KS, block diagonal by user
    CVec varpi;             // KS
    double delta = 0.0;
    std::vector<RVec> Pi;   // S diagonals of the constraint matrices
    double budget = 0.0;    // right-hand side of every constraint

    double objective(const RVec& eta_bar) const;        // eta_bar Xi eta_bar^H - 2 Re(eta_bar varpi^T) + delta
    double constraint(int s, const RVec& eta_bar) const;  // eta_bar Pi_s eta_bar^H - budget
};

QcqpData assemble_qcqp(const EffectiveChannels& h, const RVec& eps, const CVec& y, const std::vector<double>& mu,
                       double N0, double P_max);

// Change of variables p = diag(scale)^{-1} eta_bar with budgets divided by P_max.
QcqpData rescale_qcqp(const QcqpData& q, const RVec& scale, double P_max);

struct PdsState {
    RVec eta_bar;
    RVec zeta;
    double rho = 10.0;
    double alpha = 1e-3;
    RVec epsilon;
    CVec y;
};

double augmented_lagrangian(const QcqpData& q, const RVec& eta_bar, const RVec& zeta, double rho);
// Printed conjugate-convention gradient; half the real gradient of the augmented Lagrangian.
RVec lagrangian_gradient(const QcqpData& q, const RVec& eta_bar, const RVec& zeta, double rho);
PdsState pds_step(const PdsState& state, const QcqpData& q);

struct PowerOptions {
    double rho = 10.0;
    double alpha0 = 1e-3;
    int max_iter = 500;
    double tol = 1e-6;
    // also start from one user per BS and keep the better result
    bool strongest_user_start = true;
};

struct PowerTraceRow {
    int iter = 0;
    double objective = 0.0;
    double max_violation = 0.0;
    double step = 0.0;
};

struct PowerTrace {
    std::vector<PowerTraceRow> rows;
    bool converged = false;
    double final_violation = 0.0;
    std::string note;
    std::string csv() const;
};

PowerAllocation optimize_power(const EffectiveChannels& h, const PowerAllocation& init, const std::vector<double>& mu,
                               double N0, double P_max, const PowerOptions& opts, PowerTrace* trace);
PowerAllocation optimize_power(const ChannelRealization& real, const PhaseConfig& phases, const PowerAllocation& init,
                               const SystemConfig& cfg, const PowerOptions& opts, PowerTrace* trace);

}  // namespace cfris
