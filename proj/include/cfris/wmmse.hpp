#pragma once

#include "cfris/rate.hpp"

namespace cfris {

struct WmmseState {
    CVec r;        // receive scalars
    RVec kappa;    // MSE weights
    RVec error;    // average MSE at r
};

CVec mmse_receiver(const ClosedFormTerms& terms, double N0);
// |r|^2 (A + sum B + N0) - 2 Re(conj(r) * numerator) + 1
RVec average_mse(const CVec& r, const ClosedFormTerms& terms, double N0);
RVec wmmse_weight(const RVec& error);
WmmseState wmmse_update(const ClosedFormTerms& terms, double N0);

// (ln(kappa) - kappa * error + 1) / ln 2, in bits; its maximizer is kappa = 1/error.
double wmmse_surrogate(double kappa, double error);

}  // namespace cfris
