#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mcr/errors.hpp"

namespace mcr {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
/// Binary n x p feature matrix. Only the ones are stored.
template <typename Scalar>
using SparseBinary = Eigen::SparseMatrix<Scalar, Eigen::ColMajor>;

/// A class relabeling: entry k is the source class that becomes class k.
using Permutation = std::vector<Index>;

/// Numerical guards shared by the estimators.
struct Tolerances {
    double prob_clamp = 1e-4;
    double noise_var_floor = 1e-8;
};

/// Limited-information parameter block: class priors, class intercepts,
/// shared slopes and the common noise variance.
template <typename Scalar>
struct MixtureParams {
    Vector<Scalar> priors;
    Vector<Scalar> intercepts;
    Vector<Scalar> slopes;
    Scalar noise_var = Scalar(1);

    Index k() const { return priors.size(); }
    Index q() const { return slopes.size(); }
};

/// K x p Bernoulli success probabilities of the binary features given class.
template <typename Scalar>
struct ResponseProbs {
    Matrix<Scalar> probs;

    Index k() const { return probs.rows(); }
    Index p() const { return probs.cols(); }
};

template <typename Scalar>
struct FullParams {
    MixtureParams<Scalar> mixture;
    ResponseProbs<Scalar> response;

    Index k() const { return mixture.k(); }
};

template <typename Scalar>
struct Dataset {
    Vector<Scalar> y;
    Matrix<Scalar> x;
    SparseBinary<Scalar> z;
    std::optional<std::vector<Index>> true_labels;

    Index n() const { return y.size(); }
    Index q() const { return x.cols(); }
    Index p() const { return z.cols(); }
};

/// n x K soft class memberships; every row sums to one.
template <typename Scalar>
struct PosteriorMatrix {
    Matrix<Scalar> weights;

    Index n() const { return weights.rows(); }
    Index k() const { return weights.cols(); }
};

using MixtureParamsd = MixtureParams<double>;
using ResponseProbsd = ResponseProbs<double>;
using FullParamsd = FullParams<double>;
using Datasetd = Dataset<double>;
using PosteriorMatrixd = PosteriorMatrix<double>;

// ---------------------------------------------------------------------------
// Validation

template <typename Scalar>
void validate(const MixtureParams<Scalar>& m, const Tolerances& tol = {}) {
    using std::abs;
    using std::isfinite;
    const Index k = m.k();
    detail::require(k >= 1, "class count must be at least 1");
    detail::require_dims(m.intercepts.size() == k,
                         "intercepts length " + std::to_string(m.intercepts.size()) +
                             " != K = " + std::to_string(k));
    const Scalar sum = m.priors.sum();
    detail::require(abs(sum - Scalar(1)) <= Scalar(1e-12),
                    "priors sum to " + std::to_string(double(sum)) + ", expected 1");
    for (Index c = 0; c < k; ++c) {
        detail::require(m.priors(c) > Scalar(0) && m.priors(c) <= Scalar(1),
                        "priors must lie in (0, 1]");
    }
    detail::require(m.intercepts.allFinite(), "intercepts must be finite");
    detail::require(m.slopes.allFinite(), "slopes must be finite");
    detail::require(isfinite(m.noise_var) && m.noise_var >= Scalar(tol.noise_var_floor),
                    "noise_var below floor");
}

template <typename Scalar>
void validate(const ResponseProbs<Scalar>& r, const Tolerances& tol = {}) {
    const Scalar lo = Scalar(tol.prob_clamp);
    const Scalar hi = Scalar(1) - lo;
    for (Index j = 0; j < r.p(); ++j) {
        for (Index c = 0; c < r.k(); ++c) {
            const Scalar v = r.probs(c, j);
            detail::require(v >= lo && v <= hi,
                            "response probability out of [clamp, 1 - clamp] at (" +
                                std::to_string(c) + ", " + std::to_string(j) + ")");
        }
    }
}

template <typename Scalar>
void validate(const FullParams<Scalar>& f, const Tolerances& tol = {}) {
    validate(f.mixture, tol);
    if (f.response.p() > 0 || f.response.k() > 0) {
        detail::require_dims(f.response.k() == f.mixture.k(),
                             "response probs have " + std::to_string(f.response.k()) +
                                 " classes, mixture has " + std::to_string(f.mixture.k()));
    }
    validate(f.response, tol);
}

template <typename Scalar>
void validate(const Dataset<Scalar>& d) {
    detail::require(d.n() >= 1, "dataset must have at least one observation");
    detail::require_dims(d.x.rows() == d.n(), "x has " + std::to_string(d.x.rows()) +
                                                  " rows, y has " + std::to_string(d.n()));
    detail::require_dims(d.z.rows() == d.n() || (d.z.rows() == 0 && d.z.cols() == 0),
                         "z has " + std::to_string(d.z.rows()) + " rows, y has " +
                             std::to_string(d.n()));
    detail::require(d.y.allFinite(), "y contains non-finite values");
    detail::require(d.x.allFinite(), "x contains non-finite values");
    for (Index j = 0; j < d.z.outerSize(); ++j) {
        for (typename SparseBinary<Scalar>::InnerIterator it(d.z, j); it; ++it) {
            detail::require(it.value() == Scalar(0) || it.value() == Scalar(1),
                            "binary feature expected at (" + std::to_string(it.row()) + ", " +
                                std::to_string(j) + ")");
        }
    }
    if (d.true_labels) {
        detail::require_dims(Index(d.true_labels->size()) == d.n(),
                             "true_labels length differs from n");
    }
}

/// Checks every type invariant and that the parameter dimensions fit the data.
template <typename Scalar>
void validate(const FullParams<Scalar>& params, const Dataset<Scalar>& data,
              const Tolerances& tol = {}) {
    validate(data);
    validate(params, tol);
    detail::require_dims(params.mixture.q() == data.q(),
                         "slopes length " + std::to_string(params.mixture.q()) +
                             " != q = " + std::to_string(data.q()));
    detail::require_dims(params.response.p() == data.p(),
                         "response probs have p = " + std::to_string(params.response.p()) +
                             ", data has p = " + std::to_string(data.p()));
    if (data.true_labels) {
        for (Index lab : *data.true_labels) {
            detail::require_dims(lab >= 0 && lab < params.k(), "true label out of range");
        }
    }
}

template <typename Scalar>
void validate(const PosteriorMatrix<Scalar>& w, double row_tol = 1e-10) {
    for (Index i = 0; i < w.n(); ++i) {
        detail::require(std::abs(double(w.weights.row(i).sum()) - 1.0) <= row_tol,
                        "posterior row " + std::to_string(i) + " does not sum to 1");
    }
}

// ---------------------------------------------------------------------------
// Class relabeling

inline bool is_permutation_of_k(const Permutation& perm, Index k) {
    if (Index(perm.size()) != k) return false;
    std::vector<char> seen(perm.size(), 0);
    for (Index s : perm) {
        if (s < 0 || s >= k || seen[std::size_t(s)]) return false;
        seen[std::size_t(s)] = 1;
    }
    return true;
}

template <typename Scalar>
MixtureParams<Scalar> permute_classes(const MixtureParams<Scalar>& m, const Permutation& perm) {
    detail::require(is_permutation_of_k(perm, m.k()), "invalid class permutation");
    MixtureParams<Scalar> out = m;
    for (Index c = 0; c < m.k(); ++c) {
        out.priors(c) = m.priors(perm[std::size_t(c)]);
        out.intercepts(c) = m.intercepts(perm[std::size_t(c)]);
    }
    return out;
}

template <typename Scalar>
ResponseProbs<Scalar> permute_classes(const ResponseProbs<Scalar>& r, const Permutation& perm) {
    detail::require(is_permutation_of_k(perm, r.k()), "invalid class permutation");
    ResponseProbs<Scalar> out{Matrix<Scalar>(r.k(), r.p())};
    for (Index c = 0; c < r.k(); ++c) out.probs.row(c) = r.probs.row(perm[std::size_t(c)]);
    return out;
}

template <typename Scalar>
FullParams<Scalar> permute_classes(const FullParams<Scalar>& f, const Permutation& perm) {
    return {permute_classes(f.mixture, perm), permute_classes(f.response, perm)};
}

template <typename Scalar>
PosteriorMatrix<Scalar> permute_classes(const PosteriorMatrix<Scalar>& w, const Permutation& perm) {
    detail::require(is_permutation_of_k(perm, w.k()), "invalid class permutation");
    PosteriorMatrix<Scalar> out{Matrix<Scalar>(w.n(), w.k())};
    for (Index c = 0; c < w.k(); ++c) out.weights.col(c) = w.weights.col(perm[std::size_t(c)]);
    return out;
}

/// Permutation that sorts classes by ascending intercept (stable).
template <typename Scalar>
Permutation canonical_order(const MixtureParams<Scalar>& m) {
    Permutation perm(static_cast<std::size_t>(m.k()));
    std::iota(perm.begin(), perm.end(), Index(0));
    std::stable_sort(perm.begin(), perm.end(),
                     [&](Index a, Index b) { return m.intercepts(a) < m.intercepts(b); });
    return perm;
}

/// Matches estimated classes to reference classes by intercept.
///
/// Returns sigma with `estimated` class sigma[k] paired to `reference` class k,
/// minimizing sum_k (gamma_hat[sigma[k]] - gamma[k])^2. Exhaustive for K <= 8,
/// greedy closest-pair matching above.
template <typename Scalar>
Permutation align_labels(const MixtureParams<Scalar>& estimated,
                         const MixtureParams<Scalar>& reference) {
    const Index k = estimated.k();
    if (reference.k() != k) {
        throw KMismatch("align_labels: estimated K = " + std::to_string(k) +
                        ", reference K = " + std::to_string(reference.k()));
    }
    const auto& g_hat = estimated.intercepts;
    const auto& g = reference.intercepts;
    Permutation best(static_cast<std::size_t>(k));
    std::iota(best.begin(), best.end(), Index(0));
    if (k <= 8) {
        Permutation perm = best;
        Scalar best_cost = std::numeric_limits<Scalar>::infinity();
        do {
            Scalar cost(0);
            for (Index c = 0; c < k; ++c) {
                const Scalar d = g_hat(perm[std::size_t(c)]) - g(c);
                cost += d * d;
            }
            // Strict comparison keeps the lexicographically first optimum.
            if (cost < best_cost) {
                best_cost = cost;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }
    std::vector<char> used_est(std::size_t(k), 0), used_ref(std::size_t(k), 0);
    for (Index round = 0; round < k; ++round) {
        Scalar best_d = std::numeric_limits<Scalar>::infinity();
        Index bi = -1, bj = -1;
        for (Index r = 0; r < k; ++r) {
            if (used_ref[std::size_t(r)]) continue;
            for (Index e = 0; e < k; ++e) {
                if (used_est[std::size_t(e)]) continue;
                const Scalar d = std::abs(g_hat(e) - g(r));
                if (d < best_d) {
                    best_d = d;
                    bi = r;
                    bj = e;
                }
            }
        }
        used_ref[std::size_t(bi)] = used_est[std::size_t(bj)] = 1;
        best[std::size_t(bi)] = bj;
    }
    return best;
}

/// Indicator rows a_ik = 1{label_i = k}.
template <typename Scalar>
PosteriorMatrix<Scalar> indicator_weights(const std::vector<Index>& labels, Index k) {
    PosteriorMatrix<Scalar> w{Matrix<Scalar>::Zero(Index(labels.size()), k)};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        detail::require_dims(labels[i] >= 0 && labels[i] < k, "label out of range");
        w.weights(Index(i), labels[i]) = Scalar(1);
    }
    return w;
}

}  // namespace mcr
