#pragma once

#include <string>
#include <vector>

#include "cfris/wmmse.hpp"

namespace cfris {

// Stacked per-link blocks: hbar_ks(u) = E_ks u + f_ks.
struct PddBlocks {
    int S = 0, K = 0, L = 0, N = 0, M = 0;
    std::vector<CMat> GG;   // [s]  M x LN, [a_1s Gbar_1s^T, ..., a_Ls Gbar_Ls^T]
    std::vector<CVec> hhr;  // [k]  LN, stacked a_r,lk hbar_r,lk
    std::vector<CVec> hhd;  // [k*S+s] M, a_d,ks hbar_d,ks
    std::vector<CMat> E;    // [k*S+s] M x LN, GG_s diag(hhr_k)
    std::vector<CMat> C;    // [k*S+s] M x LN, [Gbar_ls^T diag(hbar_r,lk)]_l without amplitudes
    GramCache gram;

    const CMat& Eks(int k, int s) const { return E[static_cast<std::size_t>(k * S + s)]; }
    const CMat& Cks(int k, int s) const { return C[static_cast<std::size_t>(k * S + s)]; }
    const CVec& f(int k, int s) const { return hhd[static_cast<std::size_t>(k * S + s)]; }
    CVec hbar(int k, int s, const CVec& u) const { return Eks(k, s) * u + f(k, s); }
};

PddBlocks assemble_blocks(const StatisticalCsi& stats);

// Parallel builds the per-user assembly terms concurrently; the reduction order is fixed,
// so both modes produce identical iterates.
enum class ExecutionMode { Sequential, Parallel };

enum class StepRule { Backtracking, ExactLine };

// v^H Psi v + 2 Re(b^H v) + c with Psi = dense + sum_j coef_j w_j w_j^H.
// In the conjugate convention the same form reads v^T R v^* + v^T t + t^H v^*,
// R = conj(Psi), t = conj(b).
struct Quadratic {
    const CMat* dense = nullptr;
    double dense_scale = 1.0;
    std::vector<CVec> vecs;
    std::vector<double> coef;
    CVec b;
    double c = 0.0;

    CVec apply(const CVec& v) const;   // Psi v
    double value(const CVec& v) const;
    double curvature(const CVec& d) const { return std::real(d.dot(apply(d))); }
    CMat R() const;
    CVec t() const { return b.conjugate(); }
};

// Weighted-MSE surrogate F(u, x) for fixed power, receivers and weights.
class SurrogateObjective {
public:
    SurrogateObjective(const StatisticalCsi& stats, const PddBlocks& blocks, const RMat& eta, const CVec& r,
                       const RVec& kappa, const std::vector<double>& mu, double N0, double scale = 1.0);

    double eval(const CVec& u, const CVec& x) const;
    // with_constant = false leaves c at zero, which the descent steps never read
    Quadratic build_R_t(const CVec& x, bool with_constant = true) const;
    Quadratic build_Q_a(const CVec& u, bool with_constant = true) const;

    // sum_k kappa_k mu_k E{error_k} at u, from the closed form
    double weighted_mse(const CVec& u) const;
    double scale() const { return scale_; }
    void set_scale(double s) { scale_ = s; }
    int dim() const { return blocks_.L * blocks_.N; }
    void set_mode(ExecutionMode m) { mode_ = m; }

private:
    const StatisticalCsi& st_;
    const PddBlocks& blocks_;
    RMat eta_, sq_;
    CVec r_;
    RVec kappa_;
    std::vector<double> mu_;
    double N0_;
    double scale_;
    ExecutionMode mode_ = ExecutionMode::Sequential;
    RVec cw_;  // kappa mu |r|^2
    RVec dw_;  // kappa mu
    CMat rhobar_;  // K x K
    RMat omega_;   // [l] x [i]: sum_t sqrt(eta_it) b_lt^2, stored L x K
    RVec chi_prime_;  // sum_t sqrt(eta_kt)(b_d^2 + N alpha2 + N alpha3)
    RVec constant_;   // per-user u-independent part of D_k
    CMat Psi0_;
    CVec b0_;

    void build_dense();
    // u-dependent part of each user's MSE denominator
    RVec variable_part(const CVec& u, const CVec& x) const;
    std::vector<CVec> hbars(const CVec& v) const;
    // c_lsk(v) for all l, s, k, indexed (l*S+s)*K+k
    std::vector<CVec> cvecs(const CVec& v) const;
};

CVec grad_G1(const CVec& u, const Quadratic& Rt, const CVec& x, const CVec& z, const CVec& lambda1,
             const CVec& lambda2, double xi);
CVec grad_G2(const CVec& x, const Quadratic& Qa, const CVec& u, const CVec& lambda1, double xi);
CVec update_z(const CVec& u, const CVec& lambda2, double xi);

struct PddState {
    CVec u, x, z, lambda1, lambda2;
    double xi = 1.0;
    double alpha_u = 1e-2;
    double alpha_x = 1e-2;
    int inner_iters = 0;
    int outer_iters = 0;
};

void outer_update(PddState& s, double c = 0.7);

// Augmented objective of the split problem.
double pdd_objective(const SurrogateObjective& F, const PddState& s);

struct PddOptions {
    double xi0 = 1.0;
    double c = 0.7;
    double alpha0 = 1e-2;
    StepRule step = StepRule::ExactLine;
    double inner_tol = 1e-6;
    int max_inner = 200;
    double outer_tol_per_entry = 1e-6;
    int max_outer = 30;
    int max_rounds = 30;       // weighted-MMSE rounds
    double round_tol = 1e-6;
    bool normalize = true;     // rescale F so its curvature is order one at the start of a round
    double normalize_gain = 1.0;
    ExecutionMode mode = ExecutionMode::Sequential;
};

struct PddTraceRow {
    int round = 0;
    int iter = 0;
    double objective = 0.0;
    double residual_x = 0.0;
    double residual_z = 0.0;
    double xi = 0.0;
    int inner_iters = 0;
};

struct PhaseTrace {
    std::vector<double> wsr;  // closed-form weighted sum-rate, initial point first
    std::vector<PddTraceRow> pdd;
    std::vector<double> inner_objective;  // augmented objective after each inner iteration
    bool converged = false;
    double final_residual = 0.0;
    std::string note;
    std::string csv() const;
};

// Inner + outer PDD loops for one weighted-MMSE round.
PddState run_pdd(const SurrogateObjective& F, const CVec& u0, const PddOptions& opts, PhaseTrace* trace,
                 int round = 0);

PhaseConfig optimize_phases(const StatisticalCsi& stats, const PowerAllocation& eta, const PhaseConfig& init,
                            const std::vector<double>& mu, double N0, const PddOptions& opts, PhaseTrace* trace);

}  // namespace cfris
