#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mcr/final_fit.hpp"
#include "mcr/posterior.hpp"
#include "mcr/types.hpp"

namespace mcr {

template <typename Scalar>
Scalar err_norm(const Vector<Scalar>& estimate, const Vector<Scalar>& truth) {
    detail::require_dims(estimate.size() == truth.size(), "err_norm: length mismatch");
    return (estimate - truth).norm();
}

/// max_j || p_hat_j - p_j || over columns. Classes must already be aligned.
template <typename Scalar>
Scalar max_err_response(const ResponseProbs<Scalar>& probs_hat, const ResponseProbs<Scalar>& probs_true) {
    detail::require_dims(probs_hat.k() == probs_true.k() && probs_hat.p() == probs_true.p(),
                         "max_err_response: shape mismatch");
    if (probs_hat.p() == 0) return Scalar(0);
    return (probs_hat.probs - probs_true.probs).colwise().norm().maxCoeff();
}

/// max_{i,k} | w_ik - 1{label_i = k} |.
template <typename Scalar>
Scalar max_err_posterior(const PosteriorMatrix<Scalar>& weights, const std::vector<Index>& labels) {
    detail::require_dims(Index(labels.size()) == weights.n(), "max_err_posterior: label count != n");
    Scalar worst(0);
    for (Index i = 0; i < weights.n(); ++i) {
        const Index lab = labels[std::size_t(i)];
        detail::require_dims(lab >= 0 && lab < weights.k(), "max_err_posterior: label out of range");
        for (Index c = 0; c < weights.k(); ++c) {
            const Scalar a = (c == lab) ? Scalar(1) : Scalar(0);
            worst = std::max(worst, std::abs(weights.weights(i, c) - a));
        }
    }
    return worst;
}

/// Stacked (pi, gamma, theta, sigma^2).
template <typename Scalar>
Vector<Scalar> stacked_omega(const MixtureParams<Scalar>& m) {
    Vector<Scalar> v(2 * m.k() + m.q() + 1);
    v << m.priors, m.intercepts, m.slopes, m.noise_var;
    return v;
}

template <typename Scalar>
Scalar diff_real_oracle(const FinalFit<Scalar>& real_fit, const FinalFit<Scalar>& oracle_fit) {
    detail::require_dims(real_fit.k() == oracle_fit.k() && real_fit.q() == oracle_fit.q(),
                         "diff_real_oracle: K or q differ");
    return (stacked_omega(real_fit.as_mixture()) - stacked_omega(oracle_fit.as_mixture())).norm();
}

/// Out-of-sample R^2 in percent.
template <typename Scalar>
Scalar out_of_sample_r2(const Vector<Scalar>& y_true, const Vector<Scalar>& y_pred) {
    detail::require_dims(y_true.size() == y_pred.size(), "out_of_sample_r2: length mismatch");
    detail::require(y_true.size() >= 2, "out_of_sample_r2: need at least two test rows");
    const Scalar tss = (y_true.array() - y_true.mean()).square().sum();
    if (!(tss > Scalar(0))) throw ZeroVariance("out_of_sample_r2: test response is constant");
    return (Scalar(1) - (y_true - y_pred).squaredNorm() / tss) * Scalar(100);
}

/// y_hat = sum_k pi*_k gamma_k + x' theta with pi* from the features alone.
/// Intercepts and slopes come from `fit`; priors and P from `params`.
template <typename Scalar>
Scalar predict(const Vector<Scalar>& x_row, const Vector<Scalar>& z_row, const FinalFit<Scalar>& fit,
               const FullParams<Scalar>& params) {
    detail::require_dims(x_row.size() == fit.q(), "predict: x_row length != q");
    detail::require_dims(fit.k() == params.k(), "predict: fit and params disagree on K");
    const Vector<Scalar> member = posterior_features_only(z_row, params);
    return member.dot(fit.intercepts()) + x_row.dot(fit.slopes());
}

/// Batched predict over a dataset's rows.
template <typename Scalar>
Vector<Scalar> predict(const Dataset<Scalar>& data, const FinalFit<Scalar>& fit,
                       const FullParams<Scalar>& params) {
    detail::require_dims(data.q() == fit.q(), "predict: data q != model q");
    detail::require_dims(fit.k() == params.k(), "predict: fit and params disagree on K");
    const auto member = posterior_features_only(data.z, params);
    Vector<Scalar> out = member.weights * fit.intercepts();
    if (data.q() > 0) out.noalias() += data.x * fit.slopes();
    return out;
}

}  // namespace mcr
