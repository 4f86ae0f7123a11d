#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mcr/feature_em.hpp"
#include "mcr/mixreg_em.hpp"
#include "mcr/types.hpp"

namespace mcr {

struct BicTerms {
    /// sum over features of the per-feature plug-in log-likelihoods.
    double feature_loglik_sum = 0;
    Index df = 0;
    double value = 0;
    /// No feature columns: the likelihood sum is empty.
    bool degenerate = false;
};

inline Index bic_df(Index k, Index q, Index p) { return 2 * k + q + p * k; }

/// Information criterion over the per-feature joint likelihoods, each of
/// which carries the Gaussian factor:
///   -2 sum_j L^(j)(p_j) + (2K + q + pK) log n.
template <typename Scalar>
BicTerms bic_terms(const Dataset<Scalar>& data, const FullParams<Scalar>& fitted) {
    detail::require_dims(fitted.response.p() == data.p(), "bic: response probs p differs from data");
    detail::require_dims(fitted.response.k() == fitted.k() || data.p() == 0,
                         "bic: response probs K differs from mixture");
    const GaussianPlugin<Scalar> g(data, fitted.mixture);
    const Index p = data.p();
    Scalar total = Scalar(p) * g.row_log_norm.sum();
    for (Index j = 0; j < p; ++j) {
        total += detail::column_mixture_term(g, detail::column_ones(data.z, j),
                                             Vector<Scalar>(fitted.response.probs.col(j)));
    }
    BicTerms out;
    out.feature_loglik_sum = double(total);
    out.df = bic_df(fitted.k(), data.q(), p);
    out.value = -2.0 * out.feature_loglik_sum + double(out.df) * std::log(double(data.n()));
    out.degenerate = (p == 0);
    return out;
}

template <typename Scalar>
double bic(const Dataset<Scalar>& data, const FullParams<Scalar>& fitted) {
    return bic_terms(data, fitted).value;
}

struct SelectKResult {
    Index k_hat = 0;
    /// bic_values[K - 1]; +inf where the fit for K failed.
    std::vector<double> bic_values;
    std::vector<std::optional<FullParamsd>> fits;
    std::vector<EmTrace> traces;
    /// Failure message per K, empty on success.
    std::vector<std::string> errors;
};

/// Fits K = 1..k_max with the two-stage procedure (same base seed for every K)
/// and returns the BIC minimizer, ties to the smaller K. A K whose fit throws
/// is recorded with +inf and its message; only an all-failed sweep throws.
template <typename Scalar>
SelectKResult select_k(const Dataset<Scalar>& data, Index k_max, const EmConfig& config = {},
                       const FeatureEmConfig& feature_config = {}) {
    static_assert(std::is_same_v<Scalar, double>, "select_k stores double fits");
    detail::require(k_max >= 1, "select_k: k_max must be >= 1");
    SelectKResult out;
    double best = std::numeric_limits<double>::infinity();
    for (Index k = 1; k <= k_max; ++k) {
        try {
            auto init = fit_initial(data, k, config);
            auto probs = fit_response_probs(data, init.params, feature_config);
            FullParams<Scalar> full{init.params, probs};
            const double value = bic(data, full);
            out.bic_values.push_back(value);
            out.fits.emplace_back(std::move(full));
            out.traces.push_back(std::move(init.trace));
            out.errors.emplace_back();
            if (value < best) {
                best = value;
                out.k_hat = k;
            }
        } catch (const Error& e) {
            out.bic_values.push_back(std::numeric_limits<double>::infinity());
            out.fits.emplace_back(std::nullopt);
            out.traces.emplace_back();
            out.errors.emplace_back("K = " + std::to_string(k) + ": " + e.what());
        }
    }
    if (out.k_hat == 0) {
        std::string all;
        for (const auto& e : out.errors) all += "\n  " + e;
        throw Error("select_k: every candidate K failed:" + all);
    }
    return out;
}

}  // namespace mcr
