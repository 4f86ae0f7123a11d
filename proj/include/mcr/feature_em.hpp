#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mcr/mixreg_em.hpp"
#include "mcr/types.hpp"

namespace mcr {

struct FeatureEmConfig {
    int max_iters = 200;
    /// Per-column stop: max |p^(t+1) - p^(t)| < tol.
    double tol = 1e-8;
    double prob_clamp = 1e-4;
    /// Worker threads over columns; 1 runs inline.
    unsigned threads = 1;
};

/// The (Y, X) factor of every per-feature likelihood with the initial
/// estimator held fixed. It depends on (i, k) only, so it is computed once
/// and shared by all columns.
template <typename Scalar>
struct GaussianPlugin {
    /// Limited-information posterior omega_ik.
    Matrix<Scalar> omega;
    /// log sum_k pi_k phi_ik per row.
    Vector<Scalar> row_log_norm;

    GaussianPlugin(const Dataset<Scalar>& data, const MixtureParams<Scalar>& omega_hat)
        : omega(log_gaussian_terms(data, omega_hat)) {
        row_log_norm = normalize_log_rows(omega);
    }

    Index n() const { return omega.rows(); }
    Index k() const { return omega.cols(); }
};

namespace detail {

template <typename Scalar>
std::vector<Index> column_ones(const SparseBinary<Scalar>& z, Index j) {
    std::vector<Index> rows;
    for (typename SparseBinary<Scalar>::InnerIterator it(z, j); it; ++it) {
        if (it.value() != Scalar(0)) rows.push_back(it.row());
    }
    return rows;
}

template <typename Scalar>
void check_column(const Dataset<Scalar>& data, Index k, Index j, const Vector<Scalar>& pj) {
    if (j < 0 || j >= data.p()) {
        throw ColumnOutOfRange("feature column " + std::to_string(j) + " outside [0, " +
                               std::to_string(data.p()) + ")");
    }
    require_dims(pj.size() == k, "p_j has length " + std::to_string(pj.size()) +
                                     ", expected K = " + std::to_string(k));
    for (Index c = 0; c < k; ++c) {
        require(pj(c) > Scalar(0) && pj(c) < Scalar(1), "p_j entries must lie in (0, 1)");
    }
}

// sum_i log sum_k omega_ik b_ik for one column, b the Bernoulli factor.
template <typename Scalar>
Scalar column_mixture_term(const GaussianPlugin<Scalar>& g, const std::vector<Index>& ones,
                           const Vector<Scalar>& pj) {
    const Vector<Scalar> qj = Vector<Scalar>::Ones(pj.size()) - pj;
    Scalar total(0);
    auto nz = ones.begin();
    for (Index i = 0; i < g.n(); ++i) {
        const bool one = (nz != ones.end() && *nz == i);
        if (one) ++nz;
        total += std::log(g.omega.row(i).dot(one ? pj : qj));
    }
    return total;
}

struct ColumnStep {
    bool degenerate = false;
    Index degenerate_class = -1;
};

template <typename Scalar>
Vector<Scalar> column_em_step(const GaussianPlugin<Scalar>& g, const std::vector<Index>& ones,
                              const Vector<Scalar>& pj, Scalar clamp, ColumnStep& status) {
    const Index k = g.k();
    const Vector<Scalar> qj = Vector<Scalar>::Ones(k) - pj;
    Vector<Scalar> hits = Vector<Scalar>::Zero(k);
    Vector<Scalar> mass = Vector<Scalar>::Zero(k);
    Vector<Scalar> w(k);
    auto nz = ones.begin();
    for (Index i = 0; i < g.n(); ++i) {
        const bool one = (nz != ones.end() && *nz == i);
        if (one) ++nz;
        w = g.omega.row(i).transpose().cwiseProduct(one ? pj : qj);
        w /= w.sum();
        mass += w;
        if (one) hits += w;
    }
    Vector<Scalar> next(k);
    status = {};
    for (Index c = 0; c < k; ++c) {
        if (mass(c) < Scalar(1e-12)) {
            status.degenerate = true;
            status.degenerate_class = c;
            next(c) = pj(c);
            continue;
        }
        next(c) = std::clamp(hits(c) / mass(c), clamp, Scalar(1) - clamp);
    }
    return next;
}

template <typename Scalar>
Vector<Scalar> fit_column(const GaussianPlugin<Scalar>& g, const std::vector<Index>& ones,
                          const FeatureEmConfig& config, ColumnStep& status) {
    const Scalar clamp = Scalar(config.prob_clamp);
    Vector<Scalar> pj = Vector<Scalar>::Constant(g.k(), Scalar(0.5));
    for (int it = 0; it < config.max_iters; ++it) {
        Vector<Scalar> next = column_em_step(g, ones, pj, clamp, status);
        if (status.degenerate) return pj;
        const Scalar change = (next - pj).cwiseAbs().maxCoeff();
        pj = std::move(next);
        if (change < Scalar(config.tol)) break;
    }
    return pj;
}

}  // namespace detail

/// Per-feature likelihood of (Y, X, Z_j) with the initial estimator plugged in.
template <typename Scalar>
Scalar loglik_feature(const Dataset<Scalar>& data, const MixtureParams<Scalar>& omega_hat, Index j,
                      const Vector<Scalar>& p_j) {
    detail::check_column(data, omega_hat.k(), j, p_j);
    const GaussianPlugin<Scalar> g(data, omega_hat);
    return g.row_log_norm.sum() + detail::column_mixture_term(g, detail::column_ones(data.z, j), p_j);
}

/// One closed-form EM update of column j's response probabilities, clamped to
/// [clamp, 1 - clamp].
template <typename Scalar>
Vector<Scalar> em_step_feature(const Dataset<Scalar>& data, const MixtureParams<Scalar>& omega_hat,
                               Index j, const Vector<Scalar>& current_pj,
                               double prob_clamp = Tolerances{}.prob_clamp) {
    detail::check_column(data, omega_hat.k(), j, current_pj);
    const GaussianPlugin<Scalar> g(data, omega_hat);
    detail::ColumnStep status;
    Vector<Scalar> next = detail::column_em_step(g, detail::column_ones(data.z, j), current_pj,
                                                 Scalar(prob_clamp), status);
    if (status.degenerate) {
        throw DegenerateWeights("column " + std::to_string(j) + ": class " +
                                std::to_string(status.degenerate_class) +
                                " has total weight below 1e-12");
    }
    return next;
}

/// Estimates the K x p response probabilities column by column, starting each
/// column at 1/2. Columns are independent; the result does not depend on the
/// thread count.
template <typename Scalar>
ResponseProbs<Scalar> fit_response_probs(const Dataset<Scalar>& data,
                                         const MixtureParams<Scalar>& omega_hat,
                                         const FeatureEmConfig& config = {}) {
    validate(omega_hat);
    detail::require(config.max_iters >= 1 && config.tol > 0, "invalid FeatureEmConfig");
    const GaussianPlugin<Scalar> g(data, omega_hat);
    const Index p = data.p();
    ResponseProbs<Scalar> out{Matrix<Scalar>(omega_hat.k(), p)};
    std::vector<detail::ColumnStep> status(static_cast<std::size_t>(p));

    auto work = [&](Index begin, Index end) {
        for (Index j = begin; j < end; ++j) {
            out.probs.col(j) =
                detail::fit_column(g, detail::column_ones(data.z, j), config, status[std::size_t(j)]);
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, unsigned(std::max<Index>(p, 1))));
    if (threads == 1) {
        work(0, p);
    } else {
        std::vector<std::jthread> pool;
        const Index chunk = (p + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const Index b = Index(t) * chunk;
            const Index e = std::min(p, b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
    }

    std::string failed;
    for (Index j = 0; j < p; ++j) {
        if (status[std::size_t(j)].degenerate) {
            failed += " " + std::to_string(j) + "(class " +
                      std::to_string(status[std::size_t(j)].degenerate_class) + ")";
        }
    }
    if (!failed.empty()) throw DegenerateWeights("degenerate class weights in columns:" + failed);
    return out;
}

}  // namespace mcr
