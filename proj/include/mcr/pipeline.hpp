#pragma once

#include "mcr/feature_em.hpp"
#include "mcr/final_fit.hpp"
#include "mcr/mixreg_em.hpp"
#include "mcr/posterior.hpp"
#include "mcr/types.hpp"

namespace mcr {

/// Output of the four estimation stages for a fixed K.
template <typename Scalar>
struct McrFit {
    InitialFit<Scalar> initial;
    ResponseProbs<Scalar> response;
    PosteriorMatrix<Scalar> posterior;
    FinalFit<Scalar> final_fit;

    FullParams<Scalar> initial_params() const { return {initial.params, response}; }

    /// Final regression blocks combined with P_hat; used for prediction.
    FullParams<Scalar> final_params() const { return {final_fit.as_mixture(), response}; }
};

using McrFitd = McrFit<double>;

/// Initial EM, per-feature EM, full-information posterior, final regression.
template <typename Scalar>
McrFit<Scalar> fit_mcr(const Dataset<Scalar>& data, Index k, const EmConfig& config = {},
                       const FeatureEmConfig& feature_config = {}) {
    McrFit<Scalar> out;
    out.initial = fit_initial(data, k, config);
    out.response = fit_response_probs(data, out.initial.params, feature_config);
    out.posterior = posterior_full(data, out.initial_params());
    out.final_fit = fit_final(data, out.posterior);
    return out;
}

}  // namespace mcr
