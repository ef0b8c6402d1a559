#include "cfris/ris_pdd.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cfris {

PddBlocks assemble_blocks(const StatisticalCsi& st) {
    PddBlocks B;
    B.S = st.S;
    B.K = st.K;
    B.L = st.L;
    B.N = st.N;
    B.M = st.M;
    const Eigen::Index LN = static_cast<Eigen::Index>(st.L) * st.N;
    B.GG.assign(static_cast<std::size_t>(st.S), CMat::Zero(st.M, LN));
    for (int s = 0; s < st.S; ++s)
        for (int l = 0; l < st.L; ++l)
            B.GG[static_cast<std::size_t>(s)].middleCols(static_cast<Eigen::Index>(l) * st.N, st.N) =
                st.br(l, s).a * st.G(l, s).transpose();
    B.hhr.assign(static_cast<std::size_t>(st.K), CVec::Zero(LN));
    for (int k = 0; k < st.K; ++k)
        for (int l = 0; l < st.L; ++l)
            B.hhr[static_cast<std::size_t>(k)].segment(static_cast<Eigen::Index>(l) * st.N, st.N) =
                st.ru(l, k).a * st.hr(l, k);
    B.hhd.resize(static_cast<std::size_t>(st.K * st.S));
    B.E.resize(B.hhd.size());
    B.C.resize(B.hhd.size());
    for (int k = 0; k < st.K; ++k)
        for (int s = 0; s < st.S; ++s) {
            const std::size_t j = static_cast<std::size_t>(k * st.S + s);
            B.hhd[j] = st.dl(k, s).a * st.hd(k, s);
            B.E[j] = B.GG[static_cast<std::size_t>(s)] * B.hhr[static_cast<std::size_t>(k)].asDiagonal();
            B.C[j] = CMat::Zero(st.M, LN);
            for (int l = 0; l < st.L; ++l)
                B.C[j].middleCols(static_cast<Eigen::Index>(l) * st.N, st.N) =
                    st.G(l, s).transpose() * st.hr(l, k).asDiagonal();
        }
    B.gram = build_gram_cache(st);
    return B;
}

CVec Quadratic::apply(const CVec& v) const {
    CVec out(v.size());
    if (dense) {
        out.noalias() = (*dense) * v;
        out *= dense_scale;
    } else {
        out.setZero();
    }
    for (std::size_t j = 0; j < vecs.size(); ++j) out.noalias() += (coef[j] * vecs[j].dot(v)) * vecs[j];
    return out;
}

double Quadratic::value(const CVec& v) const {
    return std::real(v.dot(apply(v))) + 2.0 * std::real(b.dot(v)) + c;
}

CMat Quadratic::R() const {
    const Eigen::Index n = b.size();
    CMat P = dense ? CMat(dense_scale * (*dense)) : CMat(CMat::Zero(n, n));
    for (std::size_t j = 0; j < vecs.size(); ++j) P.noalias() += coef[j] * vecs[j] * vecs[j].adjoint();
    return P.conjugate();
}

namespace {

template <class Fn>
auto per_user(int K, ExecutionMode mode, Fn fn) {
    using T = decltype(fn(0));
    std::vector<T> out(static_cast<std::size_t>(K));
    if (mode == ExecutionMode::Parallel && K > 1) {
        std::vector<std::future<T>> jobs;
        for (int k = 0; k < K; ++k) jobs.push_back(std::async(std::launch::async, fn, k));
        for (int k = 0; k < K; ++k) out[static_cast<std::size_t>(k)] = jobs[static_cast<std::size_t>(k)].get();
    } else {
        for (int k = 0; k < K; ++k) out[static_cast<std::size_t>(k)] = fn(k);
    }
    return out;
}

struct Partial {
    std::vector<CVec> vecs;
    std::vector<double> coef;
    CVec b;
};

}  // namespace

SurrogateObjective::SurrogateObjective(const StatisticalCsi& stats, const PddBlocks& blocks, const RMat& eta,
                                       const CVec& r, const RVec& kappa, const std::vector<double>& mu, double N0,
                                       double scale)
    : st_(stats), blocks_(blocks), eta_(eta), sq_(eta.cwiseSqrt()), r_(r), kappa_(kappa), mu_(mu), N0_(N0),
      scale_(scale) {
    const int K = st_.K, S = st_.S, L = st_.L, N = st_.N;
    if (eta_.rows() != K || eta_.cols() != S) throw std::invalid_argument("SurrogateObjective: eta shape");
    if (r_.size() != K || kappa_.size() != K) throw std::invalid_argument("SurrogateObjective: weight length");
    cw_.resize(K);
    dw_.resize(K);
    for (int k = 0; k < K; ++k) {
        const double m = mu_.empty() ? 1.0 : mu_.at(static_cast<std::size_t>(k));
        dw_(k) = kappa_(k) * m;
        cw_(k) = dw_(k) * std::norm(r_(k));
    }
    omega_.resize(L, K);
    for (int l = 0; l < L; ++l)
        for (int i = 0; i < K; ++i) {
            double w = 0.0;
            for (int t = 0; t < S; ++t) w += sq_(i, t) * st_.br(l, t).b * st_.br(l, t).b;
            omega_(l, i) = w;
        }
    rhobar_ = CMat::Zero(K, K);
    for (int k = 0; k < K; ++k)
        for (int i = 0; i < K; ++i)
            for (int l = 0; l < L; ++l) {
                const double f = st_.ru(l, k).a * st_.ru(l, i).a * omega_(l, i);
                if (f != 0.0) rhobar_(k, i) += f * st_.hr(l, k).dot(st_.hr(l, i));
            }
    chi_prime_.resize(K);
    for (int k = 0; k < K; ++k) {
        double v = 0.0;
        for (int s = 0; s < S; ++s) {
            const double bd = st_.dl(k, s).b;
            v += sq_(k, s) * (bd * bd + N * st_.alpha2(k, s) + N * st_.alpha3(k, s));
        }
        chi_prime_(k) = v;
    }
    build_dense();

    // Pin the u-independent part so that F(u, u) reproduces the weighted MSE exactly.
    constant_ = RVec::Zero(K);
    const CVec uref = CVec::Ones(static_cast<Eigen::Index>(L) * N);
    const ClosedFormTerms T = closed_form_terms(st_, blocks_.gram, uref, PowerAllocation(eta_));
    const RVec var = variable_part(uref, uref);
    for (int k = 0; k < K; ++k) constant_(k) = T.A(k) + T.interference(k) + N0_ - var(k);
}

std::vector<CVec> SurrogateObjective::hbars(const CVec& v) const {
    std::vector<CVec> h(static_cast<std::size_t>(st_.K * st_.S));
    for (int k = 0; k < st_.K; ++k)
        for (int s = 0; s < st_.S; ++s) h[static_cast<std::size_t>(k * st_.S + s)] = blocks_.hbar(k, s, v);
    return h;
}

std::vector<CVec> SurrogateObjective::cvecs(const CVec& v) const {
    const int S = st_.S, K = st_.K, N = st_.N;
    std::vector<CVec> c(static_cast<std::size_t>(st_.L * S * K));
    for (int l = 0; l < st_.L; ++l)
        for (int s = 0; s < S; ++s)
            for (int k = 0; k < K; ++k)
                c[static_cast<std::size_t>((l * S + s) * K + k)] =
                    blocks_.Cks(k, s).middleCols(static_cast<Eigen::Index>(l) * N, N) *
                    v.segment(static_cast<Eigen::Index>(l) * N, N);
    return c;
}

RVec SurrogateObjective::variable_part(const CVec& u, const CVec& x) const {
    const int K = st_.K, S = st_.S, L = st_.L;
    const double M = st_.M;
    const auto hu = hbars(u), hx = hbars(x);
    const auto cu = cvecs(u);
    auto H = [&](const std::vector<CVec>& h, int k, int s) -> const CVec& {
        return h[static_cast<std::size_t>(k * S + s)];
    };
    auto cidx = [&](int l, int s, int k) -> const CVec& { return cu[static_cast<std::size_t>((l * S + s) * K + k)]; };
    auto a_ = [&](int l, int s) { return st_.br(l, s).a; };
    auto ar = [&](int l, int k) { return st_.ru(l, k).a; };
    auto br2 = [&](int l, int k) { return st_.ru(l, k).b * st_.ru(l, k).b; };

    // y_lsk = Gbar_ls^* hbar_ks(u); nu_il^(k) = sum_s sqrt(eta_is) a_ls y_lsk
    std::vector<CVec> y(static_cast<std::size_t>(L * S * K));
    for (int l = 0; l < L; ++l)
        for (int s = 0; s < S; ++s)
            for (int k = 0; k < K; ++k)
                if (a_(l, s) != 0.0) y[static_cast<std::size_t>((l * S + s) * K + k)] = st_.G(l, s).conjugate() * H(hu, k, s);
    CVec nu_buf(st_.N);
    auto nu2 = [&](int i, int l, int k) {
        nu_buf.setZero();
        for (int s = 0; s < S; ++s) {
            const double f = sq_(i, s) * a_(l, s);
            if (f != 0.0) nu_buf.noalias() += f * y[static_cast<std::size_t>((l * S + s) * K + k)];
        }
        return nu_buf.squaredNorm();
    };

    RVec D = RVec::Zero(K);
    for (int k = 0; k < K; ++k) {
        double d = 0.0;
        for (int i = 0; i < K; ++i) {
            cplx P = 0.0;
            for (int s = 0; s < S; ++s) P += sq_(i, s) * H(hx, i, s).dot(H(hu, k, s));
            d += std::norm(P) + 2.0 * M * std::real(P * rhobar_(k, i));
            for (int l = 0; l < L; ++l) {
                d += br2(l, k) * nu2(i, l, i) + br2(l, i) * nu2(i, l, k);
                double th = 0.0;
                for (int s = 0; s < S; ++s) {
                    const double f = sq_(i, s) * omega_(l, i) * a_(l, s);
                    if (f == 0.0) continue;
                    th += f * (br2(l, k) * ar(l, i) * std::real(H(hx, i, s).dot(cidx(l, s, i))) +
                               br2(l, i) * ar(l, k) * std::real(H(hx, k, s).dot(cidx(l, s, k))));
                }
                d += 2.0 * M * th;
            }
        }
        double q = 0.0;
        for (int s = 0; s < S; ++s) q += sq_(k, s) * H(hu, k, s).squaredNorm();
        d += 2.0 * M * q * chi_prime_(k);
        for (int s = 0; s < S; ++s) {
            for (int l = 0; l < L; ++l) {
                const double bl2 = st_.br(l, s).b * st_.br(l, s).b;
                const double f = eta_(k, s) * a_(l, s) * ar(l, k) * br2(l, k) * bl2;
                if (f != 0.0) d += 4.0 * f * std::real(H(hx, k, s).dot(cidx(l, s, k)));
            }
            d += 2.0 * eta_(k, s) * st_.gamma(k, s) * H(hu, k, s).squaredNorm();
        }
        for (int i = 0; i < K; ++i) {
            if (i == k) continue;
            for (int s = 0; s < S; ++s)
                d += eta_(i, s) * (st_.gamma(k, s) * H(hu, i, s).squaredNorm() +
                                   st_.gamma(i, s) * H(hu, k, s).squaredNorm());
        }
        D(k) = d;
    }
    return D;
}

double SurrogateObjective::eval(const CVec& u, const CVec& x) const {
    const int K = st_.K, S = st_.S;
    const RVec var = variable_part(u, x);
    double F = 0.0;
    for (int k = 0; k < K; ++k) {
        cplx num = 0.0;
        for (int s = 0; s < S; ++s)
            num += sq_(k, s) * (blocks_.hbar(k, s, x).dot(blocks_.hbar(k, s, u)) + st_.M * st_.chi(k, s));
        F += cw_(k) * (var(k) + constant_(k)) - 2.0 * dw_(k) * std::real(std::conj(r_(k)) * num) + dw_(k);
    }
    return scale_ * F;
}

double SurrogateObjective::weighted_mse(const CVec& u) const {
    const ClosedFormTerms T = closed_form_terms(st_, blocks_.gram, u, PowerAllocation(eta_));
    const RVec e = average_mse(r_, T, N0_);
    double v = 0.0;
    for (int k = 0; k < st_.K; ++k) v += dw_(k) * e(k);
    return v;
}

void SurrogateObjective::build_dense() {
    const int K = st_.K, S = st_.S, L = st_.L, N = st_.N, M = st_.M;
    const Eigen::Index LN = static_cast<Eigen::Index>(L) * N, SM = static_cast<Eigen::Index>(S) * M;
    auto br2 = [&](int l, int k) { return st_.ru(l, k).b * st_.ru(l, k).b; };

    std::vector<CMat> Omega(static_cast<std::size_t>(K), CMat::Zero(SM, SM));
    auto block = [&](int j, int s, int t) { return Omega[static_cast<std::size_t>(j)].block(s * M, t * M, M, M); };
    for (int k = 0; k < K; ++k) {
        const double c = cw_(k);
        if (c == 0.0) continue;
        for (int i = 0; i < K; ++i)
            for (int l = 0; l < L; ++l)
                for (int s = 0; s < S; ++s)
                    for (int t = 0; t < S; ++t) {
                        const double w = sq_(i, s) * st_.br(l, s).a * sq_(i, t) * st_.br(l, t).a;
                        if (w == 0.0) continue;
                        const CMat& g = blocks_.gram.at(l, s, t);
                        block(i, s, t) += (c * br2(l, k) * w) * g;
                        block(k, s, t) += (c * br2(l, i) * w) * g;
                    }
        for (int s = 0; s < S; ++s) {
            const double diag = 2.0 * M * sq_(k, s) * chi_prime_(k) + 2.0 * eta_(k, s) * st_.gamma(k, s);
            block(k, s, s).diagonal().array() += c * diag;
            for (int i = 0; i < K; ++i) {
                if (i == k) continue;
                block(i, s, s).diagonal().array() += c * eta_(i, s) * st_.gamma(k, s);
                block(k, s, s).diagonal().array() += c * eta_(i, s) * st_.gamma(i, s);
            }
        }
    }
    Psi0_ = CMat::Zero(LN, LN);
    b0_ = CVec::Zero(LN);
    for (int j = 0; j < K; ++j) {
        CMat Ej(SM, LN);
        CVec fj(SM);
        for (int s = 0; s < S; ++s) {
            Ej.middleRows(static_cast<Eigen::Index>(s) * M, M) = blocks_.Eks(j, s);
            fj.segment(static_cast<Eigen::Index>(s) * M, M) = blocks_.f(j, s);
        }
        const CMat OE = Omega[static_cast<std::size_t>(j)] * Ej;
        Psi0_.noalias() += Ej.adjoint() * OE;
        b0_.noalias() += OE.adjoint() * fj;  // Ej^H Omega fj with Omega Hermitian
    }
    Psi0_ = 0.5 * (Psi0_ + Psi0_.adjoint()).eval();
}

Quadratic SurrogateObjective::build_R_t(const CVec& x, bool with_constant) const {
    const int K = st_.K, S = st_.S, L = st_.L, N = st_.N;
    const double M = st_.M;
    const Eigen::Index LN = static_cast<Eigen::Index>(L) * N;
    const auto hx = hbars(x);
    auto H = [&](int k, int s) -> const CVec& { return hx[static_cast<std::size_t>(k * S + s)]; };
    auto br2 = [&](int l, int k) { return st_.ru(l, k).b * st_.ru(l, k).b; };
    // w_lsi = (Gbar_ls^T diag(hbar_r,li))^H hbar_is(x)
    std::vector<CVec> w(static_cast<std::size_t>(L * S * K));
    auto W = [&](int l, int s, int i) -> CVec& { return w[static_cast<std::size_t>((l * S + s) * K + i)]; };
    for (int l = 0; l < L; ++l)
        for (int s = 0; s < S; ++s)
            for (int i = 0; i < K; ++i)
                W(l, s, i) = blocks_.Cks(i, s).middleCols(static_cast<Eigen::Index>(l) * N, N).adjoint() * H(i, s);

    auto parts = per_user(K, mode_, [&](int k) {
        Partial p;
        p.b = CVec::Zero(LN);
        const double c = cw_(k);
        for (int i = 0; i < K; ++i) {
            CVec pi = CVec::Zero(LN);
            cplx sigma = 0.0;
            for (int s = 0; s < S; ++s) {
                if (sq_(i, s) == 0.0) continue;
                pi.noalias() += sq_(i, s) * (blocks_.Eks(k, s).adjoint() * H(i, s));
                sigma += sq_(i, s) * H(i, s).dot(blocks_.f(k, s));
            }
            p.b.noalias() += (c * (sigma + M * std::conj(rhobar_(k, i)))) * pi;
            p.vecs.push_back(std::move(pi));
            p.coef.push_back(c);
            for (int l = 0; l < L; ++l)
                for (int s = 0; s < S; ++s) {
                    const double f = c * M * sq_(i, s) * omega_(l, i) * st_.br(l, s).a;
                    if (f == 0.0) continue;
                    auto seg = p.b.segment(static_cast<Eigen::Index>(l) * N, N);
                    seg.noalias() += (f * br2(l, k) * st_.ru(l, i).a) * W(l, s, i);
                    seg.noalias() += (f * br2(l, i) * st_.ru(l, k).a) * W(l, s, k);
                }
        }
        for (int s = 0; s < S; ++s) {
            for (int l = 0; l < L; ++l) {
                const double bl2 = st_.br(l, s).b * st_.br(l, s).b;
                const double f = 2.0 * c * eta_(k, s) * st_.br(l, s).a * st_.ru(l, k).a * br2(l, k) * bl2;
                if (f == 0.0) continue;
                p.b.segment(static_cast<Eigen::Index>(l) * N, N).noalias() += f * W(l, s, k);
            }
            if (sq_(k, s) != 0.0)
                p.b.noalias() -= (dw_(k) * r_(k) * sq_(k, s)) * (blocks_.Eks(k, s).adjoint() * H(k, s));
        }
        return p;
    });

    Quadratic Q;
    Q.dense = &Psi0_;
    Q.dense_scale = scale_;
    Q.b = scale_ * b0_;
    for (auto& p : parts) {
        Q.b += scale_ * p.b;
        for (std::size_t j = 0; j < p.vecs.size(); ++j) {
            Q.vecs.push_back(std::move(p.vecs[j]));
            Q.coef.push_back(scale_ * p.coef[j]);
        }
    }
    if (with_constant) Q.c = eval(CVec::Zero(LN), x);
    return Q;
}

Quadratic SurrogateObjective::build_Q_a(const CVec& u, bool with_constant) const {
    const int K = st_.K, S = st_.S, L = st_.L, N = st_.N;
    const double M = st_.M;
    const Eigen::Index LN = static_cast<Eigen::Index>(L) * N;
    const auto hu = hbars(u);
    const auto cu = cvecs(u);
    auto H = [&](int k, int s) -> const CVec& { return hu[static_cast<std::size_t>(k * S + s)]; };
    auto cidx = [&](int l, int s, int k) -> const CVec& { return cu[static_cast<std::size_t>((l * S + s) * K + k)]; };
    auto br2 = [&](int l, int k) { return st_.ru(l, k).b * st_.ru(l, k).b; };

    auto parts = per_user(K, mode_, [&](int k) {
        Partial p;
        p.b = CVec::Zero(LN);
        const double c = cw_(k);
        // acc[j*S+s] collects the M-vectors that are later mapped through E_js^H
        std::vector<CVec> acc(static_cast<std::size_t>(K * S), CVec::Zero(st_.M));
        auto A = [&](int j, int s) -> CVec& { return acc[static_cast<std::size_t>(j * S + s)]; };
        for (int i = 0; i < K; ++i) {
            CVec phi = CVec::Zero(LN);
            cplx tau = 0.0;
            for (int s = 0; s < S; ++s) {
                if (sq_(i, s) == 0.0) continue;
                phi.noalias() += sq_(i, s) * (blocks_.Eks(i, s).adjoint() * H(k, s));
                tau += sq_(i, s) * blocks_.f(i, s).dot(H(k, s));
            }
            p.b.noalias() += (c * (std::conj(tau) + M * rhobar_(k, i))) * phi;
            p.vecs.push_back(std::move(phi));
            p.coef.push_back(c);
            for (int l = 0; l < L; ++l)
                for (int s = 0; s < S; ++s) {
                    const double f = c * M * sq_(i, s) * omega_(l, i) * st_.br(l, s).a;
                    if (f == 0.0) continue;
                    A(i, s).noalias() += (f * br2(l, k) * st_.ru(l, i).a) * cidx(l, s, i);
                    A(k, s).noalias() += (f * br2(l, i) * st_.ru(l, k).a) * cidx(l, s, k);
                }
        }
        for (int s = 0; s < S; ++s) {
            for (int l = 0; l < L; ++l) {
                const double bl2 = st_.br(l, s).b * st_.br(l, s).b;
                const double f = 2.0 * c * eta_(k, s) * st_.br(l, s).a * st_.ru(l, k).a * br2(l, k) * bl2;
                if (f == 0.0) continue;
                A(k, s).noalias() += f * cidx(l, s, k);
            }
            if (sq_(k, s) != 0.0) A(k, s).noalias() -= (dw_(k) * std::conj(r_(k)) * sq_(k, s)) * H(k, s);
        }
        for (int j = 0; j < K; ++j)
            for (int s = 0; s < S; ++s)
                if (A(j, s).squaredNorm() > 0.0) p.b.noalias() += blocks_.Eks(j, s).adjoint() * A(j, s);
        return p;
    });

    Quadratic Q;
    Q.b = CVec::Zero(LN);
    for (auto& p : parts) {
        Q.b += scale_ * p.b;
        for (std::size_t j = 0; j < p.vecs.size(); ++j) {
            Q.vecs.push_back(std::move(p.vecs[j]));
            Q.coef.push_back(scale_ * p.coef[j]);
        }
    }
    if (with_constant) Q.c = eval(u, CVec::Zero(LN));
    return Q;
}

CVec grad_G1(const CVec& u, const Quadratic& Rt, const CVec& x, const CVec& z, const CVec& lambda1,
             const CVec& lambda2, double xi) {
    if (!(xi > 0)) throw std::invalid_argument("grad_G1: xi must be positive");
    const CVec core = Rt.apply(u) + Rt.b;
    return core.conjugate() + u.conjugate() / xi - (x + z + xi * lambda1 + xi * lambda2).conjugate() / (2.0 * xi);
}

CVec grad_G2(const CVec& x, const Quadratic& Qa, const CVec& u, const CVec& lambda1, double xi) {
    if (!(xi > 0)) throw std::invalid_argument("grad_G2: xi must be positive");
    const CVec core = Qa.apply(x) + Qa.b;
    return core.conjugate() + x.conjugate() / (2.0 * xi) - (u - xi * lambda1).conjugate() / (2.0 * xi);
}

CVec update_z(const CVec& u, const CVec& lambda2, double xi) { return project_unit(u - xi * lambda2); }

void outer_update(PddState& s, double c) {
    if (!(s.xi > 0)) throw std::invalid_argument("outer_update: xi must be positive");
    if (!(c > 0 && c < 1)) throw std::invalid_argument("outer_update: c must lie in (0, 1)");
    s.lambda1 += (s.x - s.u) / s.xi;
    s.lambda2 += (s.z - s.u) / s.xi;
    s.xi *= c;
    ++s.outer_iters;
}

namespace {

double penalty_x(const PddState& s) { return (s.x - s.u + s.xi * s.lambda1).squaredNorm() / (2.0 * s.xi); }
double penalty_z(const PddState& s) { return (s.z - s.u + s.xi * s.lambda2).squaredNorm() / (2.0 * s.xi); }

// Backtracking along -conj(grad); returns true if a descent step was taken.
template <class Obj>
bool descend(CVec& v, const CVec& grad, double& alpha, double alpha0, Obj objective) {
    const double g2 = grad.squaredNorm();
    if (g2 == 0.0) return false;
    const double f0 = objective(v);
    double a = std::min(2.0 * alpha, 1e6 * alpha0);
    for (int tries = 0; tries < 80; ++tries) {
        const CVec trial = v - a * grad.conjugate();
        const double f1 = objective(trial);
        if (f1 <= f0 - 1e-4 * 2.0 * a * g2) {
            v = trial;
            alpha = a;
            return true;
        }
        a *= 0.5;
    }
    alpha = alpha0;
    return false;
}

}  // namespace

double pdd_objective(const SurrogateObjective& F, const PddState& s) {
    return F.eval(s.u, s.x) + penalty_x(s) + penalty_z(s);
}

PddState run_pdd(const SurrogateObjective& F, const CVec& u0, const PddOptions& opts, PhaseTrace* trace, int round) {
    PddState s;
    s.u = u0;
    s.x = u0;
    s.z = project_unit(u0);
    s.lambda1 = CVec::Zero(u0.size());
    s.lambda2 = CVec::Zero(u0.size());
    s.xi = opts.xi0;
    s.alpha_u = s.alpha_x = opts.alpha0;
    const double tol_out = opts.outer_tol_per_entry * static_cast<double>(u0.size());

    for (int outer = 0; outer < opts.max_outer; ++outer) {
        double G = pdd_objective(F, s);
        int inner = 0;
        for (; inner < opts.max_inner; ++inner) {
            const Quadratic Rt = F.build_R_t(s.x, false);
            const CVec gu = grad_G1(s.u, Rt, s.x, s.z, s.lambda1, s.lambda2, s.xi);
            if (opts.step == StepRule::ExactLine) {
                const CVec d = gu.conjugate();
                const double den = Rt.curvature(d) + d.squaredNorm() / s.xi;
                if (den > 0.0) {
                    s.alpha_u = d.squaredNorm() / den;
                    s.u -= s.alpha_u * d;
                }
            } else {
                descend(s.u, gu, s.alpha_u, opts.alpha0, [&](const CVec& v) {
                    return Rt.value(v) + (s.x - v + s.xi * s.lambda1).squaredNorm() / (2.0 * s.xi) +
                           (s.z - v + s.xi * s.lambda2).squaredNorm() / (2.0 * s.xi);
                });
            }
            const Quadratic Qa = F.build_Q_a(s.u);
            const CVec gx = grad_G2(s.x, Qa, s.u, s.lambda1, s.xi);
            if (opts.step == StepRule::ExactLine) {
                const CVec d = gx.conjugate();
                const double den = Qa.curvature(d) + d.squaredNorm() / (2.0 * s.xi);
                if (den > 0.0) {
                    s.alpha_x = d.squaredNorm() / den;
                    s.x -= s.alpha_x * d;
                }
            } else {
                descend(s.x, gx, s.alpha_x, opts.alpha0, [&](const CVec& v) {
                    return Qa.value(v) + (v - s.u + s.xi * s.lambda1).squaredNorm() / (2.0 * s.xi);
                });
            }
            s.z = update_z(s.u, s.lambda2, s.xi);
            const double Gn = Qa.value(s.x) + penalty_x(s) + penalty_z(s);
            ++s.inner_iters;
            if (trace) trace->inner_objective.push_back(Gn);
            const double rel = std::abs(Gn - G) / std::max(std::abs(G), 1e-300);
            G = Gn;
            if (rel < opts.inner_tol) {
                ++inner;
                break;
            }
        }
        const double rx = (s.x - s.u).squaredNorm(), rz = (s.z - s.u).squaredNorm();
        if (trace) trace->pdd.push_back({round, outer, G, rx, rz, s.xi, inner});
        if (std::max(rx, rz) < tol_out) break;
        outer_update(s, opts.c);
    }
    return s;
}

std::string PhaseTrace::csv() const {
    std::ostringstream os;
    os.precision(12);
    os << "iter,objective,residual_x,residual_z,xi\n";
    for (std::size_t j = 0; j < pdd.size(); ++j)
        os << j << ',' << pdd[j].objective << ',' << pdd[j].residual_x << ',' << pdd[j].residual_z << ','
           << pdd[j].xi << '\n';
    return os.str();
}

PhaseConfig optimize_phases(const StatisticalCsi& st, const PowerAllocation& eta, const PhaseConfig& init,
                            const std::vector<double>& mu, double N0, const PddOptions& opts, PhaseTrace* trace) {
    PhaseTrace local;
    PhaseTrace& tr = trace ? *trace : local;
    tr = PhaseTrace{};
    if (st.L == 0 || st.N == 0) {
        const double w = closed_form_wsr(st, init, eta, mu, N0);
        tr.wsr = {w, w};
        tr.converged = true;
        return init;
    }
    if (init.u().size() != static_cast<Eigen::Index>(st.L) * st.N)
        throw std::invalid_argument("optimize_phases: initial phase length");

    const PddBlocks blocks = assemble_blocks(st);
    CVec u = project_unit(init.u());
    auto wsr_at = [&](const CVec& v) {
        return weighted_sum(closed_form_rate(closed_form_terms(st, blocks.gram, v, eta), N0), mu);
    };
    double wsr = wsr_at(u);
    tr.wsr.push_back(wsr);

    for (int round = 0; round < opts.max_rounds; ++round) {
        const ClosedFormTerms T = closed_form_terms(st, blocks.gram, u, eta);
        const WmmseState W = wmmse_update(T, N0);
        SurrogateObjective F(st, blocks, eta.eta, W.r, W.kappa, mu, N0);
        F.set_mode(opts.mode);
        if (opts.normalize) {
            // Unit curvature for the largest direction of F keeps the penalty schedule meaningful.
            const Quadratic Rt = F.build_R_t(u);
            const CMat R = Rt.R();
            const double lam = Eigen::SelfAdjointEigenSolver<CMat>(R, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
            const CVec g = (Rt.apply(u) + Rt.b);
            const double scale = std::max(lam, g.cwiseAbs().maxCoeff());
            if (scale > 0.0 && std::isfinite(scale)) F.set_scale(opts.normalize_gain / scale);
        }
        const PddState s = run_pdd(F, u, opts, &tr, round);
        const double residual = std::max((s.x - s.u).squaredNorm(), (s.z - s.u).squaredNorm());
        tr.final_residual = residual;
        const CVec cand = project_unit(s.u);
        const double w = wsr_at(cand);
        if (w >= wsr) {
            const double gain = (w - wsr) / std::max(std::abs(wsr), 1e-300);
            u = cand;
            wsr = w;
            tr.wsr.push_back(wsr);
            if (gain < opts.round_tol) {
                tr.converged = true;
                break;
            }
        } else {
            // The projected PDD point lost ground; keep the previous phases.
            tr.wsr.push_back(wsr);
            tr.converged = true;
            tr.note = "stopped: projected update did not improve the sum-rate";
            break;
        }
    }
    const double tol_out = opts.outer_tol_per_entry * static_cast<double>(u.size());
    if (tr.final_residual >= tol_out) {
        std::ostringstream os;
        os << (tr.note.empty() ? "" : tr.note + "; ") << "consensus residual " << tr.final_residual
           << " above threshold " << tol_out;
        tr.note = os.str();
    }
    return PhaseConfig(u, st.L, st.N);
}

}  // namespace cfris
