#include "cfris/rate.hpp"

#include <cmath>
#include <stdexcept>

namespace cfris {

std::vector<double> weights_of(const SystemConfig& cfg) {
    std::vector<double> mu(static_cast<std::size_t>(cfg.K));
    for (int k = 0; k < cfg.K; ++k) mu[static_cast<std::size_t>(k)] = cfg.weight(k);
    return mu;
}

double weighted_sum(const RVec& rate, const std::vector<double>& mu) {
    double w = 0.0;
    for (Eigen::Index k = 0; k < rate.size(); ++k)
        w += (mu.empty() ? 1.0 : mu[static_cast<std::size_t>(k)]) * rate(k);
    return w;
}

RateReport instantaneous_rate(const EffectiveChannels& h, const PowerAllocation& eta, const std::vector<double>& mu,
                              double N0) {
    const int K = h.K, S = h.S;
    if (eta.eta.rows() != K || eta.eta.cols() != S) throw std::invalid_argument("instantaneous_rate: shape mismatch");
    if ((eta.eta.array() < 0).any()) throw std::invalid_argument("instantaneous_rate: negative power coefficient");
    RateReport r;
    r.sinr.resize(K);
    r.rate.resize(K);
    r.signal.resize(K);
    r.interference.resize(K);
    r.noise = N0;
    const RMat sq = eta.eta.cwiseSqrt();
    for (int k = 0; k < K; ++k) {
        double amp = 0.0;
        for (int s = 0; s < S; ++s) amp += sq(k, s) * h.at(k, s).squaredNorm();
        double intf = 0.0;
        for (int i = 0; i < K; ++i) {
            if (i == k) continue;
            cplx c = 0.0;
            for (int s = 0; s < S; ++s) c += sq(i, s) * h.at(i, s).dot(h.at(k, s));
            intf += std::norm(c);
        }
        r.signal(k) = amp * amp;
        r.interference(k) = intf;
        r.sinr(k) = r.signal(k) / (intf + N0);
        r.rate(k) = std::log2(1.0 + r.sinr(k));
    }
    r.wsr = weighted_sum(r.rate, mu);
    return r;
}

RateReport instantaneous_rate(const ChannelRealization& real, const PhaseConfig& phases, const PowerAllocation& eta,
                              const SystemConfig& cfg) {
    return instantaneous_rate(effective_channel(real, phases), eta, weights_of(cfg), cfg.N0);
}

MonteCarloRate monte_carlo_rate(const StatisticalCsi& stats, const PhaseConfig& phases, const PowerAllocation& eta,
                                int n_samples, Seed seed, ErgodicMode mode, const std::vector<double>& mu, double N0) {
    if (n_samples < 1) throw std::invalid_argument("monte_carlo_rate: need at least one sample");
    const int K = stats.K;
    const double n = n_samples;
    // centered running moments of (signal_k, interference_k), per-user rates and the weighted sum
    RVec mean = RVec::Zero(2 * K);
    RMat m2 = RMat::Zero(2 * K, 2 * K);
    RVec rmean = RVec::Zero(K), rm2 = RVec::Zero(K);
    double wmean = 0.0, wm2 = 0.0;
    for (int j = 0; j < n_samples; ++j) {
        const auto real = sample_channels(stats, seed.child(static_cast<std::uint64_t>(j)));
        const auto rep = instantaneous_rate(effective_channel(real, phases), eta, mu, N0);
        const double cnt = j + 1.0;
        RVec v(2 * K);
        v << rep.signal, rep.interference;
        const RVec dv = v - mean;
        mean += dv / cnt;
        m2.noalias() += dv * (v - mean).transpose();
        const RVec dr = rep.rate - rmean;
        rmean += dr / cnt;
        rm2 += dr.cwiseProduct(rep.rate - rmean);
        const double dw = rep.wsr - wmean;
        wmean += dw / cnt;
        wm2 += dw * (rep.wsr - wmean);
    }
    MonteCarloRate out;
    out.rate.resize(K);
    out.se.resize(K);
    out.mean_signal = mean.head(K);
    out.mean_interference = mean.tail(K);
    auto se_of = [&](double m2v) {
        if (n_samples < 2) return 0.0;
        return std::sqrt(std::max(0.0, m2v / (n - 1.0)) / n);
    };
    if (mode == ErgodicMode::TrueErgodic) {
        for (int k = 0; k < K; ++k) {
            out.rate(k) = rmean(k);
            out.se(k) = se_of(rm2(k));
        }
        out.wsr = wmean;
        out.wsr_se = se_of(wm2);
        return out;
    }
    // ratio of means with delta-method errors
    RMat cov = RMat::Zero(2 * K, 2 * K);
    if (n_samples > 1) cov = m2 / (n - 1.0);
    RVec gw = RVec::Zero(2 * K);
    const double ln2 = std::log(2.0);
    for (int k = 0; k < K; ++k) {
        const double S = mean(k), I = mean(K + k) + N0;
        out.rate(k) = std::log2(1.0 + S / I);
        RVec g = RVec::Zero(2 * K);
        g(k) = 1.0 / (ln2 * (I + S));
        g(K + k) = -S / (ln2 * I * (I + S));
        out.se(k) = std::sqrt(std::max(0.0, g.dot(cov * g)) / n);
        gw += (mu.empty() ? 1.0 : mu[static_cast<std::size_t>(k)]) * g;
    }
    out.wsr = weighted_sum(out.rate, mu);
    out.wsr_se = std::sqrt(std::max(0.0, gw.dot(cov * gw)) / n);
    return out;
}

GramCache build_gram_cache(const StatisticalCsi& st) {
    GramCache g;
    g.L = st.L;
    g.S = st.S;
    g.gram.resize(static_cast<std::size_t>(st.L * st.S * st.S));
    for (int l = 0; l < st.L; ++l)
        for (int s = 0; s < st.S; ++s)
            for (int t = 0; t < st.S; ++t)
                g.gram[static_cast<std::size_t>((l * st.S + s) * st.S + t)] =
                    st.G(l, s).transpose() * st.G(l, t).conjugate();
    return g;
}

std::vector<CVec> mean_effective(const StatisticalCsi& st, const CVec& u) {
    std::vector<CVec> hb(static_cast<std::size_t>(st.K * st.S));
    for (int k = 0; k < st.K; ++k)
        for (int s = 0; s < st.S; ++s) {
            CVec h = st.dl(k, s).a * st.hd(k, s);
            for (int l = 0; l < st.L; ++l) {
                const double c = st.br(l, s).a * st.ru(l, k).a;
                if (c == 0.0) continue;
                const CVec v = u.segment(static_cast<Eigen::Index>(l) * st.N, st.N).cwiseProduct(st.hr(l, k));
                h.noalias() += c * (st.G(l, s).transpose() * v);
            }
            hb[static_cast<std::size_t>(k * st.S + s)] = std::move(h);
        }
    return hb;
}

ClosedFormTerms closed_form_terms(const StatisticalCsi& st, const PhaseConfig& phases, const PowerAllocation& eta) {
    return closed_form_terms(st, build_gram_cache(st), phases.u(), eta);
}

ClosedFormTerms closed_form_terms(const StatisticalCsi& st, const GramCache& gram, const CVec& u,
                                  const PowerAllocation& eta) {
    const int S = st.S, K = st.K, L = st.L, N = st.N;
    const double M = st.M;
    if (eta.eta.rows() != K || eta.eta.cols() != S) throw std::invalid_argument("closed_form_terms: shape mismatch");
    if (u.size() != static_cast<Eigen::Index>(L) * N) throw std::invalid_argument("closed_form_terms: phase length");

    ClosedFormTerms T;
    T.K = K;
    T.S = S;
    T.hbar = mean_effective(st, u);
    T.A = RVec::Zero(K);
    T.B = RMat::Zero(K, K);
    T.numerator = RVec::Zero(K);
    T.a_terms.assign(static_cast<std::size_t>(K), {});
    T.b_terms.assign(static_cast<std::size_t>(K * K), {});

    const RMat sq = eta.eta.cwiseSqrt();
    auto a_ = [&](int l, int s) { return st.br(l, s).a; };
    auto b_ = [&](int l, int s) { return st.br(l, s).b; };
    auto ar = [&](int l, int k) { return st.ru(l, k).a; };
    auto brr = [&](int l, int k) { return st.ru(l, k).b; };
    auto idx = [&](int l, int s, int k) { return static_cast<std::size_t>((l * S + s) * K + k); };

    // c_lsk = Gbar_ls^T (theta_l .* hr_lk),  y_lsk = Gbar_ls^* hbar_ks
    std::vector<CVec> c(static_cast<std::size_t>(L * S * K)), y(static_cast<std::size_t>(L * S * K));
    for (int l = 0; l < L; ++l) {
        const CVec th = u.segment(static_cast<Eigen::Index>(l) * N, N);
        for (int s = 0; s < S; ++s)
            for (int k = 0; k < K; ++k) {
                c[idx(l, s, k)] = st.G(l, s).transpose() * th.cwiseProduct(st.hr(l, k));
                y[idx(l, s, k)] = st.G(l, s).conjugate() * T.hb(k, s);
            }
    }
    RMat gam(K, S), hn(K, S);
    for (int k = 0; k < K; ++k)
        for (int s = 0; s < S; ++s) {
            gam(k, s) = st.gamma(k, s);
            hn(k, s) = T.hb(k, s).squaredNorm();
        }

    // X^(k)_st = sum_l a_ls a_lt b_r,lk^2 Gbar_ls^T Gbar_lt^*
    auto Xmat = [&](int k, int s, int t) {
        CMat X = CMat::Zero(st.M, st.M);
        for (int l = 0; l < L; ++l) {
            const double f = a_(l, s) * a_(l, t) * brr(l, k) * brr(l, k);
            if (f != 0.0) X += f * gram.at(l, s, t);
        }
        return X;
    };

    for (int k = 0; k < K; ++k) {
        SignalTerms& A = T.a_terms[static_cast<std::size_t>(k)];
        double q = 0.0, chi_sum = 0.0;
        for (int s = 0; s < S; ++s) {
            q += sq(k, s) * hn(k, s);
            chi_sum += sq(k, s) * st.chi(k, s);
        }
        T.numerator(k) = q + M * chi_sum;
        A.quartic = q * q;
        A.mean_scatter = 2.0 * M * q * chi_sum;
        A.constant = M * M * chi_sum * chi_sum;
        for (int l = 0; l < L; ++l) {
            CVec nu = CVec::Zero(N);
            for (int s = 0; s < S; ++s) nu += (sq(k, s) * a_(l, s)) * y[idx(l, s, k)];
            A.ris_cross += 2.0 * brr(l, k) * brr(l, k) * nu.squaredNorm();
        }
        for (int s = 0; s < S; ++s)
            for (int t = 0; t < S; ++t) {
                const double w = sq(k, s) * sq(k, t);
                if (w == 0.0) continue;
                if (L > 0) A.trace += w * Xmat(k, s, t).squaredNorm();
                double nl = 0.0;
                for (int l = 0; l < L; ++l) {
                    const double br2 = brr(l, k) * brr(l, k), ar2 = ar(l, k) * ar(l, k);
                    const double as2 = a_(l, s) * a_(l, s), at2 = a_(l, t) * a_(l, t);
                    const double bs2 = b_(l, s) * b_(l, s), bt2 = b_(l, t) * b_(l, t);
                    nl += (as2 * bt2 + at2 * bs2) * br2 * br2 + bs2 * bt2 * br2 * br2 + 2.0 * bs2 * bt2 * ar2 * br2;
                }
                A.nlos += w * M * M * N * nl;
            }
        double th = 0.0;
        for (int s = 0; s < S; ++s)
            for (int l = 0; l < L; ++l) {
                double wsum = 0.0;
                for (int t = 0; t < S; ++t) wsum += sq(k, t) * b_(l, t) * b_(l, t);
                const double omega = M * sq(k, s) * wsum + eta.eta(k, s) * b_(l, s) * b_(l, s);
                const double f = a_(l, s) * ar(l, k) * brr(l, k) * brr(l, k) * omega;
                if (f != 0.0) th += f * std::real(T.hb(k, s).dot(c[idx(l, s, k)]));
            }
        A.theta_cross = 4.0 * th;
        for (int s = 0; s < S; ++s) {
            const double e = eta.eta(k, s);
            if (e == 0.0) continue;
            const double g = gam(k, s);
            double extra = 0.0;
            for (int l = 0; l < L; ++l) {
                const double br2 = brr(l, k) * brr(l, k), ar2 = ar(l, k) * ar(l, k);
                const double as2 = a_(l, s) * a_(l, s), bs2 = b_(l, s) * b_(l, s);
                extra += 2.0 * as2 * bs2 * br2 * br2 + bs2 * bs2 * br2 * br2 + 2.0 * bs2 * bs2 * ar2 * br2;
            }
            A.single_bs += e * (2.0 * g * hn(k, s) + 2.0 * M * N * st.alpha2(k, s) * g + M * g * g + M * N * extra);
        }
        T.A(k) = A.total();
    }

    for (int k = 0; k < K; ++k)
        for (int i = 0; i < K; ++i) {
            if (i == k) continue;
            InterferenceTerms& B = T.b_terms[static_cast<std::size_t>(k * K + i)];
            cplx p = 0.0;
            for (int s = 0; s < S; ++s) p += sq(i, s) * T.hb(i, s).dot(T.hb(k, s));
            cplx rho = 0.0;
            for (int l = 0; l < L; ++l) {
                const double f = ar(l, k) * ar(l, i);
                if (f == 0.0) continue;
                const cplx hh = st.hr(l, k).dot(st.hr(l, i));
                double wsum = 0.0;
                for (int t = 0; t < S; ++t) wsum += sq(i, t) * b_(l, t) * b_(l, t);
                rho += f * wsum * hh;
            }
            B.quartic = std::norm(p);
            B.rho_cross = 2.0 * M * std::real(p * rho);
            for (int l = 0; l < L; ++l) {
                CVec vi = CVec::Zero(N), vk = CVec::Zero(N);
                for (int s = 0; s < S; ++s) {
                    vi += (sq(i, s) * a_(l, s)) * y[idx(l, s, i)];
                    vk += (sq(i, s) * a_(l, s)) * y[idx(l, s, k)];
                }
                B.ris_cross += brr(l, k) * brr(l, k) * vi.squaredNorm() + brr(l, i) * brr(l, i) * vk.squaredNorm();
            }
            double scat = 0.0;
            for (int s = 0; s < S; ++s)
                for (int t = 0; t < S; ++t) {
                    const double w = sq(i, s) * sq(i, t);
                    if (w == 0.0) continue;
                    if (L > 0) {
                        const CMat Xk = Xmat(k, s, t), Xi = Xmat(i, s, t);
                        B.trace += w * std::real(Xk.cwiseProduct(Xi.conjugate()).sum());
                    }
                    double nl = 0.0, sc = 0.0;
                    for (int l = 0; l < L; ++l) {
                        const double brk = brr(l, k) * brr(l, k), bri = brr(l, i) * brr(l, i);
                        const double ark = ar(l, k) * ar(l, k), ari = ar(l, i) * ar(l, i);
                        const double bs2 = b_(l, s) * b_(l, s), bt2 = b_(l, t) * b_(l, t);
                        nl += a_(l, s) * a_(l, s) * bt2 * brk * bri;
                        sc += bs2 * bt2 * (brk * bri + brk * ari + ark * bri);
                    }
                    B.nlos += 2.0 * w * M * M * N * nl;
                    scat += w * M * M * N * sc;
                }
            B.rho_scatter = M * M * std::norm(rho) + scat;
            double th = 0.0;
            for (int s = 0; s < S; ++s)
                for (int l = 0; l < L; ++l) {
                    double wsum = 0.0;
                    for (int t = 0; t < S; ++t) wsum += sq(i, t) * b_(l, t) * b_(l, t);
                    const double f = sq(i, s) * wsum * a_(l, s);
                    if (f == 0.0) continue;
                    th += f * (brr(l, k) * brr(l, k) * ar(l, i) * std::real(T.hb(i, s).dot(c[idx(l, s, i)])) +
                               brr(l, i) * brr(l, i) * ar(l, k) * std::real(T.hb(k, s).dot(c[idx(l, s, k)])));
                }
            B.theta_cross = 2.0 * M * th;
            for (int s = 0; s < S; ++s) {
                const double e = eta.eta(i, s);
                if (e == 0.0) continue;
                B.single_bs += e * (gam(k, s) * (hn(i, s) + M * N * st.alpha2(i, s)) +
                                    gam(i, s) * (hn(k, s) + M * N * st.alpha2(k, s)) + M * gam(k, s) * gam(i, s));
            }
            T.B(k, i) = B.total();
        }
    return T;
}

RVec closed_form_rate(const ClosedFormTerms& T, double N0) {
    RVec r(T.K);
    for (int k = 0; k < T.K; ++k) r(k) = std::log2(1.0 + T.A(k) / (T.interference(k) + N0));
    return r;
}

double closed_form_wsr(const StatisticalCsi& st, const PhaseConfig& phases, const PowerAllocation& eta,
                       const std::vector<double>& mu, double N0) {
    return weighted_sum(closed_form_rate(closed_form_terms(st, phases, eta), N0), mu);
}

RVec nlos_rate(const StatisticalCsi& st, const PowerAllocation& eta, double N0) {
    for (const auto& v : {&st.bs_ris, &st.ris_ue, &st.direct})
        for (const auto& lk : *v)
            if (lk.a != 0.0) throw std::invalid_argument("nlos_rate: statistics contain line-of-sight power");
    const int S = st.S, K = st.K, L = st.L, N = st.N;
    const double M = st.M;
    const RMat sq = eta.eta.cwiseSqrt();
    auto b2 = [&](int l, int s) { return st.br(l, s).b * st.br(l, s).b; };
    auto br2 = [&](int l, int k) { return st.ru(l, k).b * st.ru(l, k).b; };
    RMat g(K, S);
    for (int k = 0; k < K; ++k)
        for (int s = 0; s < S; ++s) g(k, s) = st.dl(k, s).b * st.dl(k, s).b + N * st.alpha3(k, s);
    RVec r(K);
    for (int k = 0; k < K; ++k) {
        double A = 0.0;
        for (int s = 0; s < S; ++s)
            for (int t = 0; t < S; ++t) {
                double sum = 0.0;
                for (int l = 0; l < L; ++l) sum += b2(l, s) * br2(l, k) * br2(l, k) * b2(l, t);
                A += sq(k, s) * sq(k, t) * (N * M * M * sum + M * M * g(k, s) * g(k, t));
            }
        for (int s = 0; s < S; ++s) {
            double sum = 0.0;
            for (int l = 0; l < L; ++l) sum += b2(l, s) * b2(l, s) * br2(l, k) * br2(l, k);
            A += eta.eta(k, s) * (M * g(k, s) * g(k, s) + M * N * sum);
        }
        double Bsum = 0.0;
        for (int i = 0; i < K; ++i) {
            if (i == k) continue;
            double B = 0.0;
            for (int s = 0; s < S; ++s)
                for (int t = 0; t < S; ++t) {
                    double sum = 0.0;
                    for (int l = 0; l < L; ++l) sum += b2(l, s) * b2(l, t) * br2(l, k) * br2(l, i);
                    B += M * M * N * sq(i, s) * sq(i, t) * sum;
                }
            for (int s = 0; s < S; ++s) B += M * eta.eta(i, s) * g(k, s) * g(i, s);
            Bsum += B;
        }
        r(k) = std::log2(1.0 + A / (Bsum + N0));
    }
    return r;
}

PowerAllocation statistical_equal_power(const StatisticalCsi& st, const PhaseConfig& phases, double P_max) {
    const auto hb = mean_effective(st, phases.u());
    RMat eta(st.K, st.S);
    for (int k = 0; k < st.K; ++k)
        for (int s = 0; s < st.S; ++s) {
            const double g = hb[static_cast<std::size_t>(k * st.S + s)].squaredNorm() + st.M * st.chi(k, s);
            eta(k, s) = g > 0.0 ? P_max / (st.K * g) : 0.0;
        }
    return PowerAllocation(eta);
}

}  // namespace cfris
