#pragma once

#include <string>
#include <vector>

#include "mcr/numerics.hpp"
#include "mcr/types.hpp"

namespace mcr {

namespace detail {

// Per-class constant sum_j log(1 - p_kj) and the K x p log-odds matrix.
template <typename Scalar>
struct BernoulliLogTerms {
    Vector<Scalar> log_miss_sum;
    Matrix<Scalar> log_odds;

    explicit BernoulliLogTerms(const ResponseProbs<Scalar>& r) {
        const Matrix<Scalar> log_q = (Scalar(1) - r.probs.array()).log().matrix();
        log_miss_sum = log_q.rowwise().sum();
        log_odds = r.probs.array().log().matrix() - log_q;
    }
};

template <typename Scalar>
void check_response(const ResponseProbs<Scalar>& r, Index k, Index p) {
    require_dims(r.p() == p, "response probs have p = " + std::to_string(r.p()) +
                                 ", data has p = " + std::to_string(p));
    require_dims(r.k() == k || p == 0, "response probs have K = " + std::to_string(r.k()) +
                                           ", mixture has K = " + std::to_string(k));
}

}  // namespace detail

/// Full-information membership: Gaussian factor times the Bernoulli product,
/// accumulated as log terms over the nonzeros only.
template <typename Scalar>
PosteriorMatrix<Scalar> posterior_full(const Dataset<Scalar>& data, const FullParams<Scalar>& params) {
    detail::require_dims(data.z.rows() == data.n() || data.p() == 0, "z rows differ from n");
    detail::check_response(params.response, params.k(), data.p());
    PosteriorMatrix<Scalar> w{log_gaussian_terms(data, params.mixture)};
    if (data.p() > 0) {
        const detail::BernoulliLogTerms<Scalar> b(params.response);
        w.weights.rowwise() += b.log_miss_sum.transpose();
        w.weights += data.z * b.log_odds.transpose();
    }
    normalize_log_rows(w.weights);
    return w;
}

/// Membership from the features alone, for rows whose response is unknown.
template <typename Scalar>
Vector<Scalar> posterior_features_only(const Vector<Scalar>& z_row, const FullParams<Scalar>& params) {
    detail::check_response(params.response, params.k(), z_row.size());
    Matrix<Scalar> logw = params.mixture.priors.array().log().matrix().transpose();
    if (z_row.size() > 0) {
        const detail::BernoulliLogTerms<Scalar> b(params.response);
        logw += b.log_miss_sum.transpose() + z_row.transpose() * b.log_odds.transpose();
    }
    normalize_log_rows(logw);
    return logw.row(0).transpose();
}

/// Row-batched form of posterior_features_only over a sparse feature block.
template <typename Scalar>
PosteriorMatrix<Scalar> posterior_features_only(const SparseBinary<Scalar>& z,
                                                const FullParams<Scalar>& params) {
    detail::check_response(params.response, params.k(), z.cols());
    const Vector<Scalar> log_prior = params.mixture.priors.array().log().matrix();
    PosteriorMatrix<Scalar> w{Matrix<Scalar>(z.rows(), params.k())};
    w.weights.rowwise() = log_prior.transpose();
    if (z.cols() > 0) {
        const detail::BernoulliLogTerms<Scalar> b(params.response);
        w.weights.rowwise() += b.log_miss_sum.transpose();
        w.weights += z * b.log_odds.transpose();
    }
    normalize_log_rows(w.weights);
    return w;
}

/// Row-wise argmax; ties go to the lowest class index.
template <typename Scalar>
std::vector<Index> hard_assign(const PosteriorMatrix<Scalar>& w) {
    std::vector<Index> out(static_cast<std::size_t>(w.n()));
    for (Index i = 0; i < w.n(); ++i) {
        Index best = 0;
        for (Index c = 1; c < w.k(); ++c)
            if (w.weights(i, c) > w.weights(i, best)) best = c;
        out[std::size_t(i)] = best;
    }
    return out;
}

}  // namespace mcr
