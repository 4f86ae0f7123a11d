#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcr/feature_em.hpp"
#include "mcr/mixreg_em.hpp"
#include "mcr/simgen.hpp"

namespace mcr {

/// A replication grid over (n, p) on the default simulation design.
///
/// Metric groups:
///   initial     err_pi err_gamma err_theta err_sigma2 (+ log_ variants)
///   response    maxerr_p, log_maxerr_p
///   posterior   maxerr_post, log_maxerr_post, assign_accuracy
///   final       diff, log_diff
///   select_k    k_hat, k_correct; per cell a k_recovery_pct row with rep = 0
///   prediction  or_mcr, or_ols on a first-half / second-half split
struct HarnessSpec {
    std::vector<Index> n_values;
    /// Explicit p grid; when empty, p = round(p_over_n * n).
    std::vector<Index> p_values;
    std::optional<double> p_over_n;
    int reps = 1;
    std::vector<std::string> metrics{"initial"};
    std::uint64_t seed = 20240101;
    Index k = 5;
    Index k_max = 10;
    EmConfig em;
    FeatureEmConfig feature;
    /// Shares one response-probability matrix across replications.
    std::optional<std::uint64_t> probs_seed;
};

const std::vector<std::string>& harness_metric_groups();

void validate(const HarnessSpec& spec);
HarnessSpec harness_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HarnessSpec& spec);

/// The (n, p) cells of the grid, in output order.
std::vector<std::pair<Index, Index>> harness_cells(const HarnessSpec& spec);

/// Seed of replication `rep` (1-based) in cell (n, p).
std::uint64_t replication_seed(std::uint64_t base, Index n, Index p, int rep);

/// Simulation design used for one replication.
SimDesign replication_design(const HarnessSpec& spec, Index n, Index p, int rep);

struct MetricRow {
    Index n = 0;
    Index p = 0;
    int rep = 0;
    std::string metric;
    double value = 0;
};

struct HarnessResult {
    std::vector<MetricRow> rows;
    /// "n=..,p=..,rep=..: message" for every failed replication.
    std::vector<std::string> failures;
};

/// Metrics of a single replication. Throws on failure.
std::vector<MetricRow> run_replication(const HarnessSpec& spec, Index n, Index p, int rep);

/// Runs every replication on at most `jobs` threads. Rows are ordered by
/// (n, p, rep) whatever the completion order; a failed replication yields a
/// single `failed` row and the run continues.
HarnessResult run_harness(const HarnessSpec& spec, unsigned jobs = 1);

void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows);

}  // namespace mcr
