#pragma once

#include <Eigen/Cholesky>

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "mcr/random.hpp"
#include "mcr/types.hpp"

namespace mcr {

struct ProbRange {
    double lo = 0;
    double hi = 1;
};

/// Synthetic design: latent classes, AR(1)-correlated covariates, block
/// structured response probabilities and Gaussian noise.
struct SimDesign {
    Index n = 0;
    Index p = 0;
    Index q = 0;
    Index k = 0;
    Vector<double> priors;
    Vector<double> intercepts;
    Vector<double> slopes;
    double noise_var = 1;
    double rho = 0;
    ProbRange block_diag_range{0.8, 0.95};
    ProbRange block_offdiag_range{0.01, 0.3};
    std::uint64_t seed = 0;
    /// When set, P is drawn from this seed and shared across replications;
    /// otherwise P is redrawn from `seed`.
    std::optional<std::uint64_t> probs_seed;
};

inline void validate(const SimDesign& d) {
    detail::require(d.n >= 1 && d.p >= 0 && d.q >= 0 && d.k >= 1, "invalid design sizes");
    detail::require_dims(d.priors.size() == d.k && d.intercepts.size() == d.k,
                         "design priors/intercepts length != k");
    detail::require_dims(d.slopes.size() == d.q, "design slopes length != q");
    detail::require(std::abs(d.priors.sum() - 1.0) <= 1e-12 && d.priors.minCoeff() > 0,
                    "design priors must be a probability vector");
    detail::require(d.noise_var > 0, "design noise_var must be > 0");
    detail::require(d.rho > -1 && d.rho < 1, "rho must lie in (-1, 1)");
    for (const ProbRange& r : {d.block_diag_range, d.block_offdiag_range}) {
        detail::require(r.lo > 0 && r.hi < 1 && r.lo <= r.hi, "probability range must lie in (0, 1)");
    }
}

/// Five classes, eight sparse-signal covariates with rho = 0.5 and unit noise.
inline SimDesign default_design(Index n, Index p, std::uint64_t seed) {
    detail::require(n >= 1 && p >= 1, "default_design: n and p must be >= 1");
    SimDesign d;
    d.n = n;
    d.p = p;
    d.q = 8;
    d.k = 5;
    d.priors = (Vector<double>(5) << 0.15, 0.2, 0.3, 0.25, 0.1).finished();
    d.intercepts = (Vector<double>(5) << -4, -1, 2, 5, 8).finished();
    d.slopes = (Vector<double>(8) << 3, 1.5, 0, 0, 2, 0, 0, 0).finished();
    d.noise_var = 1;
    d.rho = 0.5;
    d.seed = seed;
    return d;
}

/// Sigma_ab = rho^|a - b|.
inline Matrix<double> ar1_covariance(Index q, double rho) {
    Matrix<double> s(q, q);
    for (Index a = 0; a < q; ++a)
        for (Index b = 0; b < q; ++b) s(a, b) = std::pow(rho, double(std::abs(a - b)));
    return s;
}

/// Feature group of column j: K contiguous groups of floor(p/K) columns, the
/// remainder going to the last group.
inline Index feature_group(Index j, Index p, Index k) {
    const Index size = p / k;
    if (size == 0) return k - 1;
    return std::min(j / size, k - 1);
}

inline Matrix<double> draw_response_probs(const SimDesign& d) {
    Rng rng(derive_seed(d.probs_seed.value_or(d.seed), {1}));
    Matrix<double> probs(d.k, d.p);
    for (Index j = 0; j < d.p; ++j) {
        const Index g = feature_group(j, d.p, d.k);
        for (Index c = 0; c < d.k; ++c) {
            const ProbRange& r = (g == c) ? d.block_diag_range : d.block_offdiag_range;
            probs(c, j) = rng.uniform(r.lo, r.hi);
        }
    }
    return probs;
}

struct Simulation {
    Datasetd data;
    FullParamsd truth;
};

/// Draws one dataset; bitwise deterministic given the design.
inline Simulation generate(const SimDesign& d) {
    validate(d);
    Simulation sim;
    sim.truth.mixture = {d.priors, d.intercepts, d.slopes, d.noise_var};
    sim.truth.response.probs = draw_response_probs(d);

    std::vector<Index> labels(static_cast<std::size_t>(d.n));
    {
        Rng rng(derive_seed(d.seed, {2}));
        for (auto& lab : labels) {
            const double u = rng.uniform();
            double acc = 0;
            lab = d.k - 1;
            for (Index c = 0; c < d.k; ++c) {
                acc += d.priors(c);
                if (u < acc) {
                    lab = c;
                    break;
                }
            }
        }
    }

    Matrix<double> x(d.n, d.q);
    if (d.q > 0) {
        Rng rng(derive_seed(d.seed, {3}));
        Matrix<double> std_normal(d.n, d.q);
        for (Index i = 0; i < d.n; ++i)
            for (Index a = 0; a < d.q; ++a) std_normal(i, a) = rng.normal();
        const Eigen::LLT<Matrix<double>> llt(ar1_covariance(d.q, d.rho));
        x.noalias() = std_normal * llt.matrixU();
    }

    SparseBinary<double> z(d.n, d.p);
    {
        Rng rng(derive_seed(d.seed, {4}));
        std::vector<Eigen::Triplet<double>> ones;
        for (Index i = 0; i < d.n; ++i) {
            const Index c = labels[std::size_t(i)];
            for (Index j = 0; j < d.p; ++j)
                if (rng.uniform() < sim.truth.response.probs(c, j)) ones.emplace_back(i, j, 1.0);
        }
        z.setFromTriplets(ones.begin(), ones.end());
        z.makeCompressed();
    }

    Vector<double> y(d.n);
    {
        Rng rng(derive_seed(d.seed, {5}));
        const double sd = std::sqrt(d.noise_var);
        for (Index i = 0; i < d.n; ++i) {
            y(i) = d.intercepts(labels[std::size_t(i)]) + sd * rng.normal();
        }
        if (d.q > 0) y.noalias() += x * d.slopes;
    }

    sim.data.y = std::move(y);
    sim.data.x = std::move(x);
    sim.data.z = std::move(z);
    sim.data.true_labels = std::move(labels);
    return sim;
}

}  // namespace mcr
