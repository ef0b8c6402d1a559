#include "cfris/power_pds.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cfris {

namespace {

double weight(const std::vector<double>& mu, int k) { return mu.empty() ? 1.0 : mu.at(static_cast<std::size_t>(k)); }

// Sum_s sqrt(eta_ks) ||h_ks||^2 and the cross terms sum_s sqrt(eta_is) h_ks^T h_is^*.
cplx cross(const EffectiveChannels& h, const RMat& sq, int k, int i) {
    cplx c = 0.0;
    for (int s = 0; s < h.S; ++s) c += sq(i, s) * h.at(i, s).dot(h.at(k, s));
    return c;
}

}  // namespace

RVec eta_bar_of(const PowerAllocation& eta) {
    const int K = static_cast<int>(eta.eta.rows()), S = static_cast<int>(eta.eta.cols());
    RVec v(K * S);
    for (int k = 0; k < K; ++k)
        for (int s = 0; s < S; ++s) v(k * S + s) = std::sqrt(std::max(0.0, eta.eta(k, s)));
    return v;
}

PowerAllocation from_eta_bar(const RVec& eta_bar, int K, int S) {
    if (eta_bar.size() != K * S) throw std::invalid_argument("from_eta_bar: length mismatch");
    RMat e(K, S);
    for (int k = 0; k < K; ++k)
        for (int s = 0; s < S; ++s) e(k, s) = eta_bar(k * S + s) * eta_bar(k * S + s);
    return PowerAllocation(e);
}

PowerAllocation equal_power(const EffectiveChannels& h, double P_max) {
    RMat e(h.K, h.S);
    for (int k = 0; k < h.K; ++k)
        for (int s = 0; s < h.S; ++s) {
            const double g = h.at(k, s).squaredNorm();
            e(k, s) = g > 0.0 ? P_max / (h.K * g) : 0.0;
        }
    return PowerAllocation(e);
}

PowerAllocation scale_to_budget(const EffectiveChannels& h, const PowerAllocation& eta, double P_max) {
    PowerAllocation out = eta;
    out.eta = out.eta.cwiseMax(0.0);
    const RVec used = out.used_power(h);
    for (int s = 0; s < h.S; ++s)
        if (used(s) > P_max) out.eta.col(s) *= P_max / used(s);
    return out;
}

RVec compute_gamma(const EffectiveChannels& h, const PowerAllocation& eta, double N0) {
    return instantaneous_rate(h, eta, {}, N0).sinr;
}

RVec dual_transform_eps(const RVec& gamma) {
    if ((gamma.array() < 0).any()) throw std::invalid_argument("dual_transform_eps: negative SINR");
    return gamma;
}

double dual_transform_objective(const RVec& eps, const RVec& gamma, const std::vector<double>& mu) {
    double v = 0.0;
    for (Eigen::Index k = 0; k < gamma.size(); ++k) {
        const double m = weight(mu, static_cast<int>(k));
        v += m * (std::log1p(eps(k)) - eps(k) + (1.0 + eps(k)) * gamma(k) / (1.0 + gamma(k)));
    }
    return v / std::log(2.0);
}

CVec quadratic_transform_y(const EffectiveChannels& h, const PowerAllocation& eta, const RVec& eps,
                           const std::vector<double>& mu, double N0) {
    const RMat sq = eta.eta.cwiseSqrt();
    CVec y(h.K);
    for (int k = 0; k < h.K; ++k) {
        double den = N0;
        for (int i = 0; i < h.K; ++i) den += std::norm(cross(h, sq, k, i));
        if (!(den > 0)) throw std::invalid_argument("quadratic_transform_y: zero denominator");
        y(k) = std::sqrt(weight(mu, k) * (1.0 + eps(k))) * std::real(cross(h, sq, k, k)) / den;
    }
    return y;
}

double quadratic_transform_objective(const EffectiveChannels& h, const PowerAllocation& eta, const RVec& eps,
                                     const CVec& y, const std::vector<double>& mu, double N0) {
    const RMat sq = eta.eta.cwiseSqrt();
    double v = 0.0;
    for (int k = 0; k < h.K; ++k) {
        double den = N0;
        for (int i = 0; i < h.K; ++i) den += std::norm(cross(h, sq, k, i));
        v += 2.0 * std::sqrt(weight(mu, k) * (1.0 + eps(k))) * std::real(std::conj(y(k)) * cross(h, sq, k, k)) -
             std::norm(y(k)) * den;
    }
    return v;
}

double QcqpData::objective(const RVec& e) const {
    const CVec ec = e.cast<cplx>();
    return std::real(ec.dot(Xi * ec)) - 2.0 * e.dot(varpi.real()) + delta;
}

double QcqpData::constraint(int s, const RVec& e) const {
    return e.cwiseAbs2().dot(Pi.at(static_cast<std::size_t>(s))) - budget;
}

QcqpData assemble_qcqp(const EffectiveChannels& h, const RVec& eps, const CVec& y, const std::vector<double>& mu,
                       double N0, double P_max) {
    const int K = h.K, S = h.S;
    QcqpData q;
    q.Xi = CMat::Zero(K * S, K * S);
    q.varpi = CVec::Zero(K * S);
    q.delta = 0.0;
    for (int i = 0; i < K; ++i) {
        auto D = q.Xi.block(i * S, i * S, S, S);
        for (int k = 0; k < K; ++k) {
            CVec d(S);
            for (int s = 0; s < S; ++s) d(s) = h.at(i, s).dot(h.at(k, s));
            D.noalias() += std::norm(y(k)) * d * d.adjoint();
        }
    }
    for (int k = 0; k < K; ++k) {
        const cplx f = std::sqrt(weight(mu, k) * (1.0 + eps(k))) * std::conj(y(k));
        for (int s = 0; s < S; ++s) q.varpi(k * S + s) = f * h.at(k, s).squaredNorm();
        q.delta += std::norm(y(k)) * N0;
    }
    q.Pi.assign(static_cast<std::size_t>(S), RVec::Zero(K * S));
    for (int s = 0; s < S; ++s)
        for (int k = 0; k < K; ++k) q.Pi[static_cast<std::size_t>(s)](k * S + s) = h.at(k, s).squaredNorm();
    q.budget = P_max;
    return q;
}

QcqpData rescale_qcqp(const QcqpData& q, const RVec& scale, double P_max) {
    QcqpData out;
    const CVec d = scale.cast<cplx>();
    out.Xi = d.asDiagonal() * q.Xi * d.asDiagonal();
    out.varpi = d.cwiseProduct(q.varpi);
    out.delta = q.delta;
    out.Pi.reserve(q.Pi.size());
    for (const RVec& p : q.Pi) out.Pi.push_back(p.cwiseProduct(scale.cwiseAbs2()) / P_max);
    out.budget = q.budget / P_max;
    return out;
}

double augmented_lagrangian(const QcqpData& q, const RVec& e, const RVec& zeta, double rho) {
    double v = q.objective(e);
    for (std::size_t s = 0; s < q.Pi.size(); ++s) {
        const double g = std::max(0.0, q.constraint(static_cast<int>(s), e));
        v += zeta(static_cast<Eigen::Index>(s)) * g + 0.5 * rho * g * g;
    }
    return v;
}

RVec lagrangian_gradient(const QcqpData& q, const RVec& e, const RVec& zeta, double rho) {
    RVec g = (q.Xi * e.cast<cplx>()).real() - q.varpi.real();
    for (std::size_t s = 0; s < q.Pi.size(); ++s) {
        const double gs = q.constraint(static_cast<int>(s), e);
        if (gs <= 0.0) continue;  // zero branch at and below the kink
        g += (zeta(static_cast<Eigen::Index>(s)) + rho * gs) * q.Pi[s].cwiseProduct(e);
    }
    return g;
}

PdsState pds_step(const PdsState& st, const QcqpData& q) {
    if (!(st.alpha > 0)) throw std::invalid_argument("pds_step: step size must be positive");
    PdsState out = st;
    const RVec grad = lagrangian_gradient(q, st.eta_bar, st.zeta, st.rho);
    out.eta_bar = (st.eta_bar - st.alpha * grad).cwiseMax(0.0);
    for (std::size_t s = 0; s < q.Pi.size(); ++s) {
        const double g = std::max(0.0, q.constraint(static_cast<int>(s), st.eta_bar));
        out.zeta(static_cast<Eigen::Index>(s)) = std::max(0.0, st.zeta(static_cast<Eigen::Index>(s)) + st.alpha * g);
    }
    return out;
}

std::string PowerTrace::csv() const {
    std::ostringstream os;
    os.precision(12);
    os << "iter,objective,max_violation,step\n";
    for (const auto& r : rows) os << r.iter << ',' << r.objective << ',' << r.max_violation << ',' << r.step << '\n';
    return os.str();
}

PowerAllocation optimize_power(const EffectiveChannels& h, const PowerAllocation& init, const std::vector<double>& mu,
                               double N0, double P_max, const PowerOptions& opts, PowerTrace* trace) {
    const int K = h.K, S = h.S;
    if (init.eta.rows() != K || init.eta.cols() != S) throw std::invalid_argument("optimize_power: shape mismatch");
    if (!(P_max > 0)) throw std::invalid_argument("optimize_power: budget must be positive");
    PowerTrace local;
    PowerTrace& tr = trace ? *trace : local;
    tr = PowerTrace{};

    // p = eta_bar ./ scale turns every per-BS budget into the unit ball.
    RVec scale(K * S);
    for (int k = 0; k < K; ++k)
        for (int s = 0; s < S; ++s) {
            const double g = h.at(k, s).norm();
            scale(k * S + s) = g > 0.0 ? std::sqrt(P_max) / g : 0.0;
        }
    auto to_alloc = [&](const RVec& p) { return from_eta_bar(scale.cwiseProduct(p), K, S); };
    auto project = [&](RVec p) {
        p = p.cwiseMax(0.0);
        for (int k = 0; k < K; ++k)
            for (int s = 0; s < S; ++s)
                if (scale(k * S + s) == 0.0) p(k * S + s) = 0.0;
        for (int s = 0; s < S; ++s) {
            double n2 = 0.0;
            for (int k = 0; k < K; ++k) n2 += p(k * S + s) * p(k * S + s);
            if (n2 > 1.0) {
                const double f = 1.0 / std::sqrt(n2);
                for (int k = 0; k < K; ++k) p(k * S + s) *= f;
            }
        }
        return p;
    };
    auto violation = [&](const PowerAllocation& e) {
        const RVec used = e.used_power(h);
        return std::max(0.0, (used.array() - P_max).maxCoeff() / P_max);
    };

    auto run = [&](RVec p, PowerTrace& tr) {
        PdsState st;
        st.eta_bar = p;
        st.zeta = RVec::Zero(S);
        st.rho = opts.rho;
        st.alpha = opts.alpha0;

        PowerAllocation cur = to_alloc(p);
        double wsr = instantaneous_rate(h, cur, mu, N0).wsr;
        tr.rows.push_back({0, wsr, violation(cur), 0.0});
        int quiet = 0;
        for (int it = 1; it <= opts.max_iter; ++it) {
            st.epsilon = dual_transform_eps(compute_gamma(h, cur, N0));
            st.y = quadratic_transform_y(h, cur, st.epsilon, mu, N0);
            const QcqpData q = rescale_qcqp(assemble_qcqp(h, st.epsilon, st.y, mu, N0, P_max), scale, P_max);
            bool accepted = false;
            double gain = 0.0;
            for (int tries = 0; tries < 60 && !accepted; ++tries) {
                PdsState next = pds_step(st, q);
                next.eta_bar = project(next.eta_bar);
                const PowerAllocation cand = to_alloc(next.eta_bar);
                const double w = instantaneous_rate(h, cand, mu, N0).wsr;
                if (w >= wsr) {
                    gain = (w - wsr) / std::max(std::abs(wsr), 1e-300);
                    const double used_step = st.alpha;
                    st = next;
                    st.alpha = 2.0 * used_step;
                    cur = cand;
                    wsr = w;
                    accepted = true;
                    tr.rows.push_back({it, wsr, violation(cur), used_step});
                } else {
                    st.alpha *= 0.5;
                }
            }
            if (!accepted) {
                tr.converged = true;
                tr.note = "no ascent step found";
                break;
            }
            quiet = gain < opts.tol ? quiet + 1 : 0;
            if (quiet >= 3) {
                tr.converged = true;
                break;
            }
        }
        tr.final_violation = violation(cur);
        if (!tr.converged) {
            std::ostringstream os;
            os << "iteration limit reached; constraint violation " << tr.final_violation;
            tr.note = os.str();
        }
        return std::make_pair(cur, wsr);
    };

    RVec p0 = eta_bar_of(scale_to_budget(h, init, P_max));
    for (Eigen::Index j = 0; j < p0.size(); ++j) p0(j) = scale(j) > 0.0 ? p0(j) / scale(j) : 0.0;
    auto best = run(project(p0), tr);
    if (opts.strongest_user_start) {
        // each BS spends its whole budget on the user with the largest weighted gain
        RVec pv = RVec::Zero(K * S);
        for (int s = 0; s < S; ++s) {
            int arg = -1;
            double top = 0.0;
            for (int k = 0; k < K; ++k) {
                const double w = (mu.empty() ? 1.0 : mu[static_cast<std::size_t>(k)]) * h.at(k, s).squaredNorm();
                if (w > top) {
                    top = w;
                    arg = k;
                }
            }
            if (arg >= 0) pv(arg * S + s) = 1.0;
        }
        PowerTrace alt;
        auto other = run(pv, alt);
        if (other.second > best.second) {
            best = other;
            tr = alt;
            tr.note = tr.note.empty() ? "kept the strongest-user start" : tr.note + "; kept the strongest-user start";
        }
    }
    return best.first;
}

PowerAllocation optimize_power(const ChannelRealization& real, const PhaseConfig& phases, const PowerAllocation& init,
                               const SystemConfig& cfg, const PowerOptions& opts, PowerTrace* trace) {
    return optimize_power(effective_channel(real, phases), init, weights_of(cfg), cfg.N0, cfg.P_max, opts, trace);
}

}  // namespace cfris
