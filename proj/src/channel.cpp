#include "cfris/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace cfris {

CVec steering_ula(int M, double theta, double spacing_over_lambda) {
    CVec a(M);
    const double step = 2.0 * kPi * spacing_over_lambda * std::sin(theta);
    a(0) = 1.0;
    for (int m = 1; m < M; ++m) a(m) = std::polar(1.0, step * m);
    return a;
}

CVec steering_upa(int N_r, int N_c, double theta, double phi, double spacing_over_lambda) {
    CVec a(N_r * N_c);
    const double kr = 2.0 * kPi * spacing_over_lambda * std::cos(theta) * std::sin(phi);
    const double kc = 2.0 * kPi * spacing_over_lambda * std::sin(theta) * std::sin(phi);
    for (int r = 0; r < N_r; ++r)
        for (int c = 0; c < N_c; ++c)
            a(r * N_c + c) = (r == 0 && c == 0) ? cplx(1.0, 0.0) : std::polar(1.0, kr * r + kc * c);
    return a;
}

CVec project_unit(const CVec& v) {
    CVec out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double m = std::abs(v(i));
        out(i) = m > 0.0 ? v(i) / m : cplx(1.0, 0.0);
    }
    return out;
}

PhaseConfig::PhaseConfig(int L, int N) : u_(CVec::Ones(static_cast<Eigen::Index>(L) * N)), L_(L), N_(N) {}

PhaseConfig::PhaseConfig(const CVec& raw, int L, int N) : u_(project_unit(raw)), L_(L), N_(N) {
    if (raw.size() != static_cast<Eigen::Index>(L) * N)
        throw std::invalid_argument("PhaseConfig: vector length must equal L*N");
}

PhaseConfig PhaseConfig::from_angles(const RVec& angles, int L, int N) {
    CVec v(angles.size());
    for (Eigen::Index i = 0; i < angles.size(); ++i) v(i) = std::polar(1.0, angles(i));
    return PhaseConfig(v, L, N);
}

RMat EffectiveChannels::gains() const {
    RMat g(K, S);
    for (int k = 0; k < K; ++k)
        for (int s = 0; s < S; ++s) g(k, s) = at(k, s).squaredNorm();
    return g;
}

RVec PowerAllocation::used_power(const EffectiveChannels& h) const {
    if (eta.rows() != h.K || eta.cols() != h.S) throw std::invalid_argument("PowerAllocation: shape mismatch");
    RVec p = RVec::Zero(h.S);
    for (int s = 0; s < h.S; ++s)
        for (int k = 0; k < h.K; ++k) p(s) += eta(k, s) * h.at(k, s).squaredNorm();
    return p;
}

bool PowerAllocation::feasible(const EffectiveChannels& h, double P_max, double rel_tol) const {
    if ((eta.array() < 0).any()) return false;
    return (used_power(h).array() <= P_max * (1.0 + rel_tol)).all();
}

namespace {

// CN(0,1): real and imaginary parts N(0, 1/2).
struct ComplexNormal {
    std::normal_distribution<double> n{0.0, std::sqrt(0.5)};
    template <class Eng>
    cplx operator()(Eng& e) {
        const double re = n(e);
        const double im = n(e);
        return {re, im};
    }
};

}  // namespace

ChannelRealization sample_channels(const StatisticalCsi& st, Seed seed) {
    ChannelRealization r;
    r.S = st.S;
    r.M = st.M;
    r.L = st.L;
    r.N = st.N;
    r.K = st.K;
    // one stream per link class so the direct paths do not depend on the surface count
    auto eng_g = make_engine(seed.child(0));
    auto eng_r = make_engine(seed.child(1));
    auto eng_d = make_engine(seed.child(2));
    ComplexNormal cn;
    r.G.reserve(st.G_los.size());
    for (int l = 0; l < st.L; ++l)
        for (int s = 0; s < st.S; ++s) {
            const auto& lk = st.br(l, s);
            CMat W(st.N, st.M);
            for (Eigen::Index j = 0; j < W.cols(); ++j)
                for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = cn(eng_g);
            r.G.push_back(lk.a * st.G(l, s) + lk.b * W);
        }
    for (int l = 0; l < st.L; ++l)
        for (int k = 0; k < st.K; ++k) {
            const auto& lk = st.ru(l, k);
            CVec w(st.N);
            for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = cn(eng_r);
            r.hr.push_back(lk.a * st.hr(l, k) + lk.b * w);
        }
    for (int k = 0; k < st.K; ++k)
        for (int s = 0; s < st.S; ++s) {
            const auto& lk = st.dl(k, s);
            CVec w(st.M);
            for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = cn(eng_d);
            r.hd.push_back(lk.a * st.hd(k, s) + lk.b * w);
        }
    return r;
}

ChannelRealization mean_channels(const StatisticalCsi& st) {
    ChannelRealization r;
    r.S = st.S;
    r.M = st.M;
    r.L = st.L;
    r.N = st.N;
    r.K = st.K;
    for (int l = 0; l < st.L; ++l)
        for (int s = 0; s < st.S; ++s) r.G.push_back(st.br(l, s).a * st.G(l, s));
    for (int l = 0; l < st.L; ++l)
        for (int k = 0; k < st.K; ++k) r.hr.push_back(st.ru(l, k).a * st.hr(l, k));
    for (int k = 0; k < st.K; ++k)
        for (int s = 0; s < st.S; ++s) r.hd.push_back(st.dl(k, s).a * st.hd(k, s));
    return r;
}

EffectiveChannels effective_channel(const ChannelRealization& real, const PhaseConfig& phases) {
    if (phases.u().size() != static_cast<Eigen::Index>(real.L) * real.N)
        throw std::invalid_argument("effective_channel: phase vector length mismatch");
    EffectiveChannels e;
    e.S = real.S;
    e.M = real.M;
    e.K = real.K;
    e.phases = phases.u();
    e.h.resize(static_cast<std::size_t>(real.K * real.S));
    for (int k = 0; k < real.K; ++k)
        for (int s = 0; s < real.S; ++s) {
            CVec h = real.hdks(k, s);
            for (int l = 0; l < real.L; ++l) {
                // h^T += h_r^T Theta G  <=>  h += G^T (theta .* h_r)
                const CVec v = phases.theta(l).cwiseProduct(real.hrlk(l, k));
                h.noalias() += real.Gls(l, s).transpose() * v;
            }
            e.at(k, s) = std::move(h);
        }
    return e;
}

std::vector<CVec> mr_precoder(const EffectiveChannels& h, const PowerAllocation& eta) {
    if (eta.eta.rows() != h.K || eta.eta.cols() != h.S) throw std::invalid_argument("mr_precoder: shape mismatch");
    if ((eta.eta.array() < 0).any()) throw std::invalid_argument("mr_precoder: negative power coefficient");
    std::vector<CVec> w(h.h.size());
    for (int k = 0; k < h.K; ++k)
        for (int s = 0; s < h.S; ++s)
            w[static_cast<std::size_t>(k * h.S + s)] = std::sqrt(eta.eta(k, s)) * h.at(k, s).conjugate();
    return w;
}

}  // namespace cfris
