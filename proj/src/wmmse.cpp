#include "cfris/wmmse.hpp"

#include <cmath>
#include <stdexcept>

namespace cfris {

CVec mmse_receiver(const ClosedFormTerms& T, double N0) {
    CVec r(T.K);
    for (int k = 0; k < T.K; ++k) {
        const double den = T.A(k) + T.interference(k) + N0;
        if (!(den > 0)) throw std::invalid_argument("mmse_receiver: nonpositive denominator");
        r(k) = T.numerator(k) / den;
    }
    return r;
}

RVec average_mse(const CVec& r, const ClosedFormTerms& T, double N0) {
    RVec e(T.K);
    for (int k = 0; k < T.K; ++k)
        e(k) = std::norm(r(k)) * (T.A(k) + T.interference(k) + N0) -
               2.0 * std::real(std::conj(r(k)) * T.numerator(k)) + 1.0;
    return e;
}

RVec wmmse_weight(const RVec& error) {
    RVec kappa(error.size());
    for (Eigen::Index k = 0; k < error.size(); ++k) {
        if (!(error(k) > 0)) throw std::invalid_argument("wmmse_weight: error must be positive");
        kappa(k) = 1.0 / error(k);
    }
    return kappa;
}

WmmseState wmmse_update(const ClosedFormTerms& T, double N0) {
    WmmseState w;
    w.r = mmse_receiver(T, N0);
    w.error = average_mse(w.r, T, N0);
    w.kappa = wmmse_weight(w.error);
    return w;
}

double wmmse_surrogate(double kappa, double error) {
    return std::log2(kappa) - kappa * error / std::log(2.0) + 1.0 / std::log(2.0);
}

}  // namespace cfris
