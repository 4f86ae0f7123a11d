#pragma once

#include <string>
#include <vector>

#include "mcr/numerics.hpp"
#include "mcr/types.hpp"

namespace mcr {

/// Final regression on the membership design (pi_i', x_i').
///
/// `phi` stacks the K class intercepts and the q slopes. `xtx_inverse` is
/// (D'D)^{-1} for the n-row design D, so se = sqrt(noise_var * diag).
template <typename Scalar>
struct FinalFit {
    Vector<Scalar> phi;
    Scalar noise_var = Scalar(0);
    Vector<Scalar> priors;
    Vector<Scalar> se;
    Vector<Scalar> p_values;
    Matrix<Scalar> xtx_inverse;

    Index k() const { return priors.size(); }
    Index q() const { return phi.size() - priors.size(); }
    auto intercepts() const { return phi.head(k()); }
    auto slopes() const { return phi.tail(q()); }

    /// The fit as a limited-information parameter block.
    MixtureParams<Scalar> as_mixture() const {
        return {priors, intercepts(), slopes(), noise_var};
    }
};

using FinalFitd = FinalFit<double>;

template <typename Scalar>
Matrix<Scalar> build_design(const PosteriorMatrix<Scalar>& weights, const Matrix<Scalar>& x) {
    detail::require_dims(weights.n() == x.rows(), "weights have " + std::to_string(weights.n()) +
                                                      " rows, x has " + std::to_string(x.rows()));
    Matrix<Scalar> d(x.rows(), weights.k() + x.cols());
    d << weights.weights, x;
    return d;
}

/// Least squares of y on the soft-membership design, with plug-in
/// homoskedastic standard errors (memberships treated as fixed), variance
/// denominator n and two-sided normal p-values.
template <typename Scalar>
FinalFit<Scalar> fit_final(const Dataset<Scalar>& data, const PosteriorMatrix<Scalar>& weights) {
    const Index n = data.n();
    const Index k = weights.k();
    const Index m = k + data.q();
    detail::require(n > m, "fit_final: need n > K + q");
    const Matrix<Scalar> design = build_design(weights, data.x);
    const LeastSquares<Scalar> ls(design);
    if (!ls.full_rank()) {
        std::string cols;
        for (Index c : ls.deficient_columns()) {
            cols += c < k ? " class" + std::to_string(c + 1) : " x" + std::to_string(c - k + 1);
        }
        throw SingularDesign("membership design is rank deficient; dependent columns:" + cols);
    }
    FinalFit<Scalar> fit;
    fit.phi = ls.solve(data.y);
    fit.noise_var = (data.y - design * fit.phi).squaredNorm() / Scalar(n);
    fit.priors = weights.weights.colwise().sum().transpose() / Scalar(n);
    fit.xtx_inverse = ls.gram_inverse();
    fit.se = (fit.noise_var * fit.xtx_inverse.diagonal().array()).sqrt().matrix();
    fit.p_values.resize(m);
    for (Index c = 0; c < m; ++c) fit.p_values(c) = normal_two_sided_p(fit.phi(c) / fit.se(c));
    return fit;
}

/// The same regression with the true class indicators as memberships.
template <typename Scalar>
FinalFit<Scalar> fit_oracle(const Dataset<Scalar>& data, Index k) {
    if (!data.true_labels) throw MissingLabels("fit_oracle requires true labels");
    return fit_final(data, indicator_weights<Scalar>(*data.true_labels, k));
}

template <typename Scalar>
FinalFit<Scalar> fit_oracle(const Dataset<Scalar>& data) {
    if (!data.true_labels || data.true_labels->empty())
        throw MissingLabels("fit_oracle requires true labels");
    const Index k = *std::max_element(data.true_labels->begin(), data.true_labels->end()) + 1;
    return fit_oracle(data, k);
}

}  // namespace mcr
