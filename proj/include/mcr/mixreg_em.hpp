#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcr/numerics.hpp"
#include "mcr/random.hpp"
#include "mcr/types.hpp"

namespace mcr {

struct EmConfig {
    int max_iters = 500;
    /// Stop when |L_t - L_{t-1}| <= rel_tol * |L_{t-1}|.
    double rel_tol = 1e-8;
    int n_starts = 20;
    std::uint64_t seed = 20240101;
    /// Use freshly updated intercepts/slopes inside the same step (ECM order)
    /// instead of the simultaneous update.
    bool sequential_updates = false;
    double noise_var_floor = 1e-8;
    /// Starts after the first add N(0, jitter_scale^2 * residual variance) to each intercept.
    double jitter_scale = 1.0;
};

inline void validate(const EmConfig& c) {
    detail::require(c.max_iters >= 1, "max_iters must be >= 1");
    detail::require(c.rel_tol > 0, "rel_tol must be > 0");
    detail::require(c.n_starts >= 1, "n_starts must be >= 1");
    detail::require(c.noise_var_floor > 0, "noise_var_floor must be > 0");
    detail::require(c.jitter_scale >= 0, "jitter_scale must be >= 0");
}

struct EmTrace {
    std::vector<double> loglik_per_iter;
    int iterations = 0;
    bool converged = false;
    int start_index = 0;
    /// Steps in which at least one class had (numerically) zero mass.
    int empty_class_steps = 0;
};

struct StepReport {
    std::vector<Index> empty_classes;
};

template <typename Scalar>
struct InitialFit {
    MixtureParams<Scalar> params;
    EmTrace trace;
};

// ---------------------------------------------------------------------------

template <typename Scalar>
Scalar loglik_limited(const Dataset<Scalar>& data, const MixtureParams<Scalar>& params) {
    const Matrix<Scalar> terms = log_gaussian_terms(data, params);
    Scalar total(0);
    for (Index i = 0; i < terms.rows(); ++i) total += log_sum_exp(terms.row(i));
    return total;
}

template <typename Scalar>
PosteriorMatrix<Scalar> posterior_limited(const Dataset<Scalar>& data,
                                          const MixtureParams<Scalar>& params) {
    PosteriorMatrix<Scalar> w{log_gaussian_terms(data, params)};
    normalize_log_rows(w.weights);
    return w;
}

namespace detail {

template <typename Scalar>
struct EStep {
    Matrix<Scalar> omega;
    Scalar loglik;
};

template <typename Scalar>
EStep<Scalar> e_step(const Dataset<Scalar>& data, const MixtureParams<Scalar>& params) {
    EStep<Scalar> out{log_gaussian_terms(data, params), Scalar(0)};
    out.loglik = normalize_log_rows(out.omega).sum();
    return out;
}

template <typename Scalar>
LeastSquares<Scalar> slope_solver(const Dataset<Scalar>& data) {
    if (data.q() == 0) return {};
    LeastSquares<Scalar> ls(data.x);
    if (!ls.full_rank()) {
        std::string cols;
        for (Index c : ls.deficient_columns()) cols += " x" + std::to_string(c);
        throw SingularDesign("X'X is not invertible; dependent columns:" + cols);
    }
    return ls;
}

// M-step given the posterior of the current parameters.
template <typename Scalar>
MixtureParams<Scalar> m_step(const Dataset<Scalar>& data, const MixtureParams<Scalar>& cur,
                             const Matrix<Scalar>& omega, const LeastSquares<Scalar>& solver,
                             const EmConfig& config, StepReport* report) {
    const Index n = data.n();
    const Index k = cur.k();
    const Scalar nf = Scalar(n);
    MixtureParams<Scalar> next = cur;

    const Vector<Scalar> mass = omega.colwise().sum().transpose();
    next.priors = mass / nf;
    for (Index c = 0; c < k; ++c) {
        next.priors(c) = std::max(next.priors(c), std::numeric_limits<Scalar>::min());
    }
    next.priors /= next.priors.sum();

    Vector<Scalar> fitted_x = Vector<Scalar>::Zero(n);
    if (data.q() > 0) fitted_x.noalias() = data.x * cur.slopes;
    const Vector<Scalar> partial = data.y - fitted_x;

    if (report) report->empty_classes.clear();
    for (Index c = 0; c < k; ++c) {
        if (mass(c) < Scalar(1e-12)) {
            if (report) report->empty_classes.push_back(c);
            continue;  // gamma_k stays frozen
        }
        next.intercepts(c) = omega.col(c).dot(partial) / mass(c);
    }

    const Vector<Scalar>& gamma_for_slopes =
        config.sequential_updates ? next.intercepts : cur.intercepts;
    if (data.q() > 0) {
        const Vector<Scalar> v = omega * gamma_for_slopes;
        next.slopes = solver.solve(data.y - v);
    }

    Scalar ss(0);
    if (config.sequential_updates) {
        Vector<Scalar> base = data.y;
        if (data.q() > 0) base.noalias() -= data.x * next.slopes;
        for (Index c = 0; c < k; ++c)
            ss += omega.col(c).dot((base.array() - next.intercepts(c)).square().matrix());
    } else {
        for (Index c = 0; c < k; ++c)
            ss += omega.col(c).dot((partial.array() - cur.intercepts(c)).square().matrix());
    }
    next.noise_var = std::max(ss / nf, Scalar(config.noise_var_floor));
    return next;
}

template <typename Scalar>
bool rel_converged(Scalar prev, Scalar cur, double rel_tol) {
    return std::abs(cur - prev) <= Scalar(rel_tol) * std::abs(prev);
}

}  // namespace detail

/// One update of the limited-information EM. The posterior weights, the
/// intercepts used to form V and the residuals in the variance update all
/// come from `current`; with `sequential_updates` the slope and variance
/// updates use the freshly computed blocks instead.
template <typename Scalar>
MixtureParams<Scalar> em_step_limited(const Dataset<Scalar>& data,
                                      const MixtureParams<Scalar>& current,
                                      const EmConfig& config = {}, StepReport* report = nullptr) {
    const auto solver = detail::slope_solver(data);
    const auto e = detail::e_step(data, current);
    return detail::m_step(data, current, e.omega, solver, config, report);
}

/// Deterministic starting point of chain `start`. Start 0 places the
/// intercepts at the (k - 0.5)/K quantiles of the OLS residuals; later starts
/// add Gaussian noise scaled by the residual standard deviation.
template <typename Scalar>
MixtureParams<Scalar> initial_guess(const Dataset<Scalar>& data, Index k, int start,
                                    const EmConfig& config) {
    const Index n = data.n();
    const Index q = data.q();
    Matrix<Scalar> design(n, q + 1);
    design.col(0).setOnes();
    if (q > 0) design.rightCols(q) = data.x;
    LeastSquares<Scalar> ls(design);
    if (!ls.full_rank()) throw SingularDesign("OLS start: design [1, X] is rank deficient");
    const Vector<Scalar> beta = ls.solve(data.y);
    const Vector<Scalar> resid = data.y - design * beta;

    std::vector<Scalar> sorted(resid.data(), resid.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const Scalar var = std::max(resid.squaredNorm() / Scalar(n), Scalar(config.noise_var_floor));
    const Scalar sd = std::sqrt(var);

    MixtureParams<Scalar> m;
    m.priors = Vector<Scalar>::Constant(k, Scalar(1) / Scalar(k));
    m.intercepts.resize(k);
    for (Index c = 0; c < k; ++c) {
        // With one class the residual mean (zero) is the exact OLS intercept.
        const Scalar offset =
            k == 1 ? Scalar(0)
                   : sorted_quantile(sorted, (Scalar(c) + Scalar(0.5)) / Scalar(k));
        m.intercepts(c) = beta(0) + offset;
    }
    m.slopes = beta.tail(q);
    m.noise_var = var;
    if (start > 0) {
        Rng rng(derive_seed(config.seed, {0x5157A27ULL, std::uint64_t(start)}));
        for (Index c = 0; c < k; ++c) m.intercepts(c) += Scalar(config.jitter_scale) * sd * Scalar(rng.normal());
    }
    return m;
}

/// Runs a single EM chain from `start_params`.
template <typename Scalar>
InitialFit<Scalar> run_em_chain(const Dataset<Scalar>& data, MixtureParams<Scalar> params,
                                const EmConfig& config, int start_index = 0) {
    validate(config);
    const auto solver = detail::slope_solver(data);
    InitialFit<Scalar> fit;
    fit.trace.start_index = start_index;
    auto e = detail::e_step(data, params);
    fit.trace.loglik_per_iter.push_back(double(e.loglik));
    StepReport report;
    for (int it = 1; it <= config.max_iters; ++it) {
        params = detail::m_step(data, params, e.omega, solver, config, &report);
        if (!report.empty_classes.empty()) ++fit.trace.empty_class_steps;
        const Scalar prev = e.loglik;
        e = detail::e_step(data, params);
        fit.trace.loglik_per_iter.push_back(double(e.loglik));
        fit.trace.iterations = it;
        if (detail::rel_converged(prev, e.loglik, config.rel_tol)) {
            fit.trace.converged = true;
            break;
        }
    }
    fit.params = std::move(params);
    return fit;
}

/// Initial estimator: best of `n_starts` EM chains on the (Y, X) likelihood,
/// with classes sorted by ascending intercept.
template <typename Scalar>
InitialFit<Scalar> fit_initial(const Dataset<Scalar>& data, Index k, const EmConfig& config = {}) {
    validate(config);
    detail::require(k >= 1, "fit_initial: K must be >= 1");
    detail::require(data.n() > k + data.q(),
                    "fit_initial: need n > K + q (n = " + std::to_string(data.n()) +
                        ", K = " + std::to_string(k) + ", q = " + std::to_string(data.q()) + ")");
    InitialFit<Scalar> best;
    bool have = false;
    for (int s = 0; s < config.n_starts; ++s) {
        auto fit = run_em_chain(data, initial_guess(data, k, s, config), config, s);
        if (!have || fit.trace.loglik_per_iter.back() > best.trace.loglik_per_iter.back()) {
            best = std::move(fit);
            have = true;
        }
    }
    best.params = permute_classes(best.params, canonical_order(best.params));
    return best;
}

}  // namespace mcr
