#include <cmath>
#include <sstream>
#include <stdexcept>

#include "cfris/rate.hpp"

namespace cfris {

namespace {

struct Accum {
    double s1 = 0, s2 = 0;
    void add(double v) {
        s1 += v;
        s2 += v * v;
    }
};

// One draw of the scattering components for a single user on every BS.
struct Parts {
    std::vector<CVec> x1, x2, x3, x4;  // [s]
};

}  // namespace

std::vector<MomentRow> moment_oracle(const StatisticalCsi& st, const PhaseConfig& phases, int n_samples, Seed seed,
                                     const RMat& eta_in) {
    if (n_samples < 2) throw std::invalid_argument("moment_oracle: need at least two samples");
    const int S = st.S, L = st.L, N = st.N, K = st.K;
    const double M = st.M;
    const RMat eta = eta_in.size() == 0 ? RMat::Ones(K, S) : eta_in;
    const RMat sq = eta.cwiseSqrt();
    const int k = 0;
    const int i = K > 1 ? 1 : 0;
    const bool pair = K > 1;
    const CVec& u = phases.u();
    const auto hb = mean_effective(st, u);
    auto hbar = [&](int kk, int s) -> const CVec& { return hb[static_cast<std::size_t>(kk * S + s)]; };

    auto a_ = [&](int l, int s) { return st.br(l, s).a; };
    auto b_ = [&](int l, int s) { return st.br(l, s).b; };
    auto ar = [&](int l, int kk) { return st.ru(l, kk).a; };
    auto brr = [&](int l, int kk) { return st.ru(l, kk).b; };
    auto th = [&](int l) { return u.segment(static_cast<Eigen::Index>(l) * N, N); };

    struct Row {
        std::string name;
        double analytic;
        Accum acc;
    };
    std::vector<Row> rows;
    auto add_row = [&](std::string name, double analytic) {
        rows.push_back({std::move(name), analytic, {}});
        return rows.size() - 1;
    };

    // analytic right-hand sides
    const auto& a1 = st.alpha1;
    const auto& a2 = st.alpha2;
    const auto& a3 = st.alpha3;
    auto bd2 = [&](int kk, int s) { return st.dl(kk, s).b * st.dl(kk, s).b; };
    std::vector<std::size_t> r_i, r_ii, r_iii, r_iv;
    for (int s = 0; s < S; ++s) {
        const std::string tag = "[s=" + std::to_string(s) + "]";
        r_i.push_back(add_row("A1.i E|x1|^2" + tag, M * bd2(k, s)));
        r_ii.push_back(add_row("A1.ii E|x2|^2" + tag, M * N * a1(k, s)));
        r_iii.push_back(add_row("A1.iii E|x3|^2" + tag, M * N * a2(k, s)));
        r_iv.push_back(add_row("A1.iv E|x4|^2" + tag, M * N * a3(k, s)));
    }
    double v2 = 0, v3 = 0, v4 = 0, v5 = 0, v6 = 0, v7 = 0;
    for (int s = 0; s < S; ++s)
        for (int t = 0; t < S; ++t) {
            const double w = sq(k, s) * sq(k, t);
            if (s != t) {
                double c2 = 0, c4 = 0;
                CMat X = CMat::Zero(st.M, st.M);
                for (int l = 0; l < L; ++l) {
                    c2 += ar(l, k) * ar(l, k) * brr(l, k) * brr(l, k) * b_(l, s) * b_(l, s) * b_(l, t) * b_(l, t);
                    c4 += std::pow(brr(l, k), 4) * b_(l, s) * b_(l, s) * b_(l, t) * b_(l, t);
                    X += a_(l, s) * a_(l, t) * brr(l, k) * brr(l, k) *
                         (st.G(l, s).transpose() * st.G(l, t).conjugate());
                }
                v2 += w * M * M * N * c2;
                v3 += w * (M * M * N * N * a2(k, s) * a2(k, t) + X.squaredNorm());
                v4 += w * (M * M * N * N * a3(k, s) * a3(k, t) + M * M * N * c4);
            }
        }
    for (int s = 0; s < S; ++s) {
        const double e = eta(k, s);
        double c6 = 0, c7 = 0, c4 = 0;
        CMat X = CMat::Zero(st.M, st.M);
        for (int l = 0; l < L; ++l) {
            c6 += ar(l, k) * ar(l, k) * brr(l, k) * brr(l, k) * std::pow(b_(l, s), 4);
            c7 += std::pow(brr(l, k), 4) * a_(l, s) * a_(l, s) * b_(l, s) * b_(l, s);
            c4 += std::pow(b_(l, s), 4) * std::pow(brr(l, k), 4);
            X += a_(l, s) * a_(l, s) * brr(l, k) * brr(l, k) * (st.G(l, s).transpose() * st.G(l, s).conjugate());
        }
        v2 += e * (N * N * M * a1(k, s) * a3(k, s) + M * M * N * c6);
        v5 += e * ((M * M + M) * (bd2(k, s) * bd2(k, s) + N * N * a1(k, s) * a1(k, s) + N * N * a3(k, s) * a3(k, s)) +
                   M * M * N * N * a2(k, s) * a2(k, s) + X.squaredNorm() + N * (M * M + M) * c4);
        v6 += e * (N * N * M * a1(k, s) * a3(k, s) + M * M * N * c6);
        v7 += e * (N * N * M * a2(k, s) * a3(k, s) + M * N * c7);
    }
    const auto r2 = add_row("A2 sum w x2^H x4 x4^H x2", v2);
    const auto r3 = add_row("A3 sum_{s!=t} w |x3_s|^2 |x3_t|^2", v3);
    const auto r4 = add_row("A4 sum_{s!=t} w |x4_s|^2 |x4_t|^2", v4);
    const auto r5 = add_row("A5 sum eta sum_n |x_n|^4", v5);
    const auto r6 = add_row("A6 sum eta |x2^H x4|^2", v6);
    const auto r7 = add_row("A7 sum eta |x3^H x4|^2", v7);

    std::size_t rb1 = 0, rb2 = 0, rb3 = 0;
    if (pair) {
        cplx rho = 0.0;
        double b1 = 0, b2 = 0, b3 = 0;
        for (int s = 0; s < S; ++s) {
            cplx rs = 0.0;
            for (int l = 0; l < L; ++l)
                rs += ar(l, k) * ar(l, i) * b_(l, s) * b_(l, s) * st.hr(l, i).dot(st.hr(l, k));
            rho += sq(i, s) * rs;
            const double e = eta(i, s);
            b1 += e * M * N * N * a1(k, s) * a1(i, s);
            b2 += e * N * N * M * (a3(k, s) * a3(i, s) + a3(k, s) * a1(i, s) + a1(k, s) * a3(i, s));
            b3 += e * (hbar(k, s).squaredNorm() * (bd2(i, s) + N * a1(i, s) + N * a3(i, s)) +
                       hbar(i, s).squaredNorm() * (bd2(k, s) + N * a1(k, s) + N * a3(k, s)) +
                       M * bd2(k, s) * bd2(i, s) + M * N * bd2(k, s) * (a1(i, s) + a2(i, s) + a3(i, s)) +
                       M * N * bd2(i, s) * (a1(k, s) + a2(k, s) + a3(k, s)) +
                       N * N * M *
                           (a1(k, s) * a2(i, s) + a2(k, s) * a1(i, s) + a2(k, s) * a3(i, s) + a3(k, s) * a2(i, s)));
            for (int t = 0; t < S; ++t) {
                double c = 0;
                for (int l = 0; l < L; ++l)
                    c += b_(l, s) * b_(l, s) * b_(l, t) * b_(l, t) *
                         (brr(l, k) * brr(l, k) * brr(l, i) * brr(l, i) + ar(l, i) * ar(l, i) * brr(l, k) * brr(l, k) +
                          ar(l, k) * ar(l, k) * brr(l, i) * brr(l, i));
                b2 += sq(i, s) * sq(i, t) * M * M * N * c;
            }
        }
        b1 += M * M * std::norm(rho);
        rb1 = add_row("B1 |sum sqrt(eta) x2_i^H x2_k|^2", b1);
        rb2 = add_row("B2 x4/x4, x2/x4, x4/x2 cross moments", b2);
        rb3 = add_row("B3 single-BS mean/scatter pairs", b3);
    }

    auto eng = make_engine(seed);
    std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
    auto cn = [&] {
        const double re = nd(eng);
        const double im = nd(eng);
        return cplx(re, im);
    };
    auto draw_vec = [&](int n) {
        CVec v(n);
        for (int j = 0; j < n; ++j) v(j) = cn();
        return v;
    };

    std::vector<CMat> Gt(static_cast<std::size_t>(L * S));
    std::vector<CVec> hrk(static_cast<std::size_t>(L)), hri(static_cast<std::size_t>(L));
    for (int n = 0; n < n_samples; ++n) {
        for (auto& g : Gt) {
            g.resize(N, st.M);
            for (Eigen::Index c = 0; c < g.cols(); ++c)
                for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = cn();
        }
        for (int l = 0; l < L; ++l) {
            hrk[static_cast<std::size_t>(l)] = draw_vec(N);
            hri[static_cast<std::size_t>(l)] = draw_vec(N);
        }
        auto parts = [&](int kk, const std::vector<CVec>& hrt) {
            Parts P;
            for (int s = 0; s < S; ++s) {
                const CVec hd = draw_vec(st.M);
                CVec x1 = st.dl(kk, s).b * hd;
                CVec x2 = CVec::Zero(st.M), x3 = CVec::Zero(st.M), x4 = CVec::Zero(st.M);
                for (int l = 0; l < L; ++l) {
                    const CMat& G = Gt[static_cast<std::size_t>(l * S + s)];
                    const CVec vbar = th(l).cwiseProduct(st.hr(l, kk));
                    const CVec vt = th(l).cwiseProduct(hrt[static_cast<std::size_t>(l)]);
                    x2 += ar(l, kk) * b_(l, s) * (G.transpose() * vbar);
                    x3 += brr(l, kk) * a_(l, s) * (st.G(l, s).transpose() * vt);
                    x4 += brr(l, kk) * b_(l, s) * (G.transpose() * vt);
                }
                P.x1.push_back(std::move(x1));
                P.x2.push_back(std::move(x2));
                P.x3.push_back(std::move(x3));
                P.x4.push_back(std::move(x4));
            }
            return P;
        };
        const Parts pk = parts(k, hrk);
        for (int s = 0; s < S; ++s) {
            const auto us = static_cast<std::size_t>(s);
            rows[r_i[us]].acc.add(pk.x1[us].squaredNorm());
            rows[r_ii[us]].acc.add(pk.x2[us].squaredNorm());
            rows[r_iii[us]].acc.add(pk.x3[us].squaredNorm());
            rows[r_iv[us]].acc.add(pk.x4[us].squaredNorm());
        }
        cplx z24 = 0.0;
        double l3 = 0, l4 = 0, l5 = 0, l6 = 0, l7 = 0;
        for (int s = 0; s < S; ++s) {
            const auto us = static_cast<std::size_t>(s);
            z24 += sq(k, s) * pk.x2[us].dot(pk.x4[us]);
            const double e = eta(k, s);
            l5 += e * (std::pow(pk.x1[us].squaredNorm(), 2) + std::pow(pk.x2[us].squaredNorm(), 2) +
                       std::pow(pk.x3[us].squaredNorm(), 2) + std::pow(pk.x4[us].squaredNorm(), 2));
            l6 += e * std::norm(pk.x2[us].dot(pk.x4[us]));
            l7 += e * std::norm(pk.x3[us].dot(pk.x4[us]));
            for (int t = 0; t < S; ++t) {
                if (t == s) continue;
                const auto ut = static_cast<std::size_t>(t);
                const double w = sq(k, s) * sq(k, t);
                l3 += w * pk.x3[us].squaredNorm() * pk.x3[ut].squaredNorm();
                l4 += w * pk.x4[us].squaredNorm() * pk.x4[ut].squaredNorm();
            }
        }
        rows[r2].acc.add(std::norm(z24));
        rows[r3].acc.add(l3);
        rows[r4].acc.add(l4);
        rows[r5].acc.add(l5);
        rows[r6].acc.add(l6);
        rows[r7].acc.add(l7);

        if (pair) {
            const Parts pi = parts(i, hri);
            cplx z22 = 0.0, z44 = 0.0, z24i = 0.0, z42 = 0.0;
            double l3b = 0.0;
            for (int s = 0; s < S; ++s) {
                const auto us = static_cast<std::size_t>(s);
                const double w = sq(i, s);
                z22 += w * pi.x2[us].dot(pk.x2[us]);
                z44 += w * pi.x4[us].dot(pk.x4[us]);
                z24i += w * pi.x2[us].dot(pk.x4[us]);
                z42 += w * pi.x4[us].dot(pk.x2[us]);
                const std::array<const CVec*, 4> xk{&pk.x1[us], &pk.x2[us], &pk.x3[us], &pk.x4[us]};
                const std::array<const CVec*, 4> xi{&pi.x1[us], &pi.x2[us], &pi.x3[us], &pi.x4[us]};
                double v = 0.0;
                for (int nn : {0, 1, 3}) {
                    v += std::norm(xi[static_cast<std::size_t>(nn)]->dot(hbar(k, s)));
                    v += std::norm(xk[static_cast<std::size_t>(nn)]->dot(hbar(i, s)));
                }
                // (component of user k, component of user i), 1-based in the identity
                static const int pairs[11][2] = {{1, 1}, {1, 2}, {2, 1}, {3, 1}, {3, 2}, {1, 3},
                                                 {2, 3}, {4, 1}, {1, 4}, {3, 4}, {4, 3}};
                for (const auto& pr : pairs)
                    v += std::norm(xi[static_cast<std::size_t>(pr[1] - 1)]->dot(*xk[static_cast<std::size_t>(pr[0] - 1)]));
                l3b += eta(i, s) * v;
            }
            rows[rb1].acc.add(std::norm(z22));
            rows[rb2].acc.add(std::norm(z44) + std::norm(z24i) + std::norm(z42));
            rows[rb3].acc.add(l3b);
        }
    }

    std::vector<MomentRow> out;
    const double n = n_samples;
    for (const auto& r : rows) {
        MomentRow m;
        m.identity = r.name;
        m.analytic = r.analytic;
        m.empirical = r.acc.s1 / n;
        const double var = std::max(0.0, (r.acc.s2 - r.acc.s1 * r.acc.s1 / n) / (n - 1.0));
        m.se = std::sqrt(var / n);
        m.z = m.se > 0.0 ? (m.empirical - m.analytic) / m.se : (m.empirical == m.analytic ? 0.0 : INFINITY);
        out.push_back(m);
    }
    return out;
}

std::string moment_csv(const std::vector<MomentRow>& rows) {
    std::ostringstream os;
    os.precision(10);
    os << "identity,analytic,empirical,se,z\n";
    for (const auto& r : rows)
        os << '"' << r.identity << "\"," << r.analytic << ',' << r.empirical << ',' << r.se << ',' << r.z << '\n';
    return os.str();
}

}  // namespace cfris
