#include "mcr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <ostream>
#include <thread>

#include "mcr/io.hpp"
#include "mcr/mcr.hpp"

namespace mcr {

const std::vector<std::string>& harness_metric_groups() {
    static const std::vector<std::string> groups{"initial", "response", "posterior",
                                                 "final",   "select_k", "prediction"};
    return groups;
}

void validate(const HarnessSpec& spec) {
    detail::require(!spec.n_values.empty(), "harness: no n values");
    detail::require(spec.p_values.empty() != !spec.p_over_n.has_value(),
                    "harness: give exactly one of p values or p_over_n");
    if (spec.p_over_n) detail::require(*spec.p_over_n > 0, "harness: p_over_n must be > 0");
    for (Index n : spec.n_values) detail::require(n >= 2, "harness: n must be >= 2");
    for (Index p : spec.p_values) detail::require(p >= 1, "harness: p must be >= 1");
    detail::require(spec.reps >= 1, "harness: reps must be >= 1");
    detail::require(!spec.metrics.empty(), "harness: no metric groups");
    const auto& known = harness_metric_groups();
    for (const auto& m : spec.metrics) {
        detail::require(std::find(known.begin(), known.end(), m) != known.end(),
                        "harness: unknown metric group '" + m + "'");
    }
    detail::require(spec.k >= 1 && spec.k_max >= 1, "harness: k and k_max must be >= 1");
    validate(spec.em);
}

HarnessSpec harness_spec_from_json(const nlohmann::json& j) {
    HarnessSpec s;
    try {
        auto as_index_list = [](const nlohmann::json& v) {
            std::vector<Index> out;
            if (v.is_array()) {
                for (const auto& e : v) out.push_back(e.get<Index>());
            } else {
                out.push_back(v.get<Index>());
            }
            return out;
        };
        for (const auto& [key, value] : j.items()) {
            if (key == "n") s.n_values = as_index_list(value);
            else if (key == "p") s.p_values = as_index_list(value);
            else if (key == "p_over_n") s.p_over_n = value.get<double>();
            else if (key == "reps") s.reps = value.get<int>();
            else if (key == "metrics") {
                s.metrics.clear();
                if (value.is_array()) {
                    for (const auto& m : value) s.metrics.push_back(m.get<std::string>());
                } else {
                    s.metrics.push_back(value.get<std::string>());
                }
            }
            else if (key == "seed") s.seed = value.get<std::uint64_t>();
            else if (key == "k") s.k = value.get<Index>();
            else if (key == "k_max") s.k_max = value.get<Index>();
            else if (key == "max_iters") s.em.max_iters = value.get<int>();
            else if (key == "tol") s.em.rel_tol = value.get<double>();
            else if (key == "starts") s.em.n_starts = value.get<int>();
            else if (key == "sequential") s.em.sequential_updates = value.get<bool>();
            else if (key == "feature_max_iters") s.feature.max_iters = value.get<int>();
            else if (key == "feature_tol") s.feature.tol = value.get<double>();
            else if (key == "probs_seed") s.probs_seed = value.get<std::uint64_t>();
            else throw SchemaMismatch("harness spec: unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaMismatch(std::string("harness spec: ") + e.what());
    }
    return s;
}

nlohmann::json to_json(const HarnessSpec& s) {
    nlohmann::json j = {{"n", s.n_values},
                        {"reps", s.reps},
                        {"metrics", s.metrics},
                        {"seed", s.seed},
                        {"k", s.k},
                        {"k_max", s.k_max},
                        {"max_iters", s.em.max_iters},
                        {"tol", s.em.rel_tol},
                        {"starts", s.em.n_starts},
                        {"sequential", s.em.sequential_updates},
                        {"feature_max_iters", s.feature.max_iters},
                        {"feature_tol", s.feature.tol}};
    if (s.p_over_n) j["p_over_n"] = *s.p_over_n;
    else j["p"] = s.p_values;
    if (s.probs_seed) j["probs_seed"] = *s.probs_seed;
    return j;
}

std::vector<std::pair<Index, Index>> harness_cells(const HarnessSpec& spec) {
    std::vector<std::pair<Index, Index>> cells;
    for (Index n : spec.n_values) {
        if (spec.p_over_n) {
            cells.emplace_back(n, std::max<Index>(1, Index(std::llround(*spec.p_over_n * double(n)))));
        } else {
            for (Index p : spec.p_values) cells.emplace_back(n, p);
        }
    }
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    return cells;
}

std::uint64_t replication_seed(std::uint64_t base, Index n, Index p, int rep) {
    return derive_seed(base, {std::uint64_t(n), std::uint64_t(p), std::uint64_t(rep)});
}

SimDesign replication_design(const HarnessSpec& spec, Index n, Index p, int rep) {
    SimDesign d = default_design(n, p, replication_seed(spec.seed, n, p, rep));
    d.probs_seed = spec.probs_seed;
    return d;
}

namespace {

bool wants(const HarnessSpec& spec, const char* group) {
    return std::find(spec.metrics.begin(), spec.metrics.end(), group) != spec.metrics.end();
}

Datasetd slice_rows(const Datasetd& d, Index begin, Index end) {
    Datasetd out;
    out.y = d.y.segment(begin, end - begin);
    out.x = d.x.middleRows(begin, end - begin);
    out.z = d.z.middleRows(begin, end - begin);
    if (d.true_labels) {
        out.true_labels.emplace(d.true_labels->begin() + begin, d.true_labels->begin() + end);
    }
    return out;
}

Vector<double> ols_predict(const Datasetd& train, const Datasetd& test) {
    Matrix<double> design(train.n(), 1 + train.q());
    design.col(0).setOnes();
    design.rightCols(train.q()) = train.x;
    const LeastSquares<double> ls(design);
    if (!ls.full_rank()) throw SingularDesign("ols: design is rank deficient");
    const Vector<double> beta = ls.solve(train.y);
    Vector<double> out = Vector<double>::Constant(test.n(), beta(0));
    if (test.q() > 0) out.noalias() += test.x * beta.tail(test.q());
    return out;
}

}  // namespace

std::vector<MetricRow> run_replication(const HarnessSpec& spec, Index n, Index p, int rep) {
    const SimDesign design = replication_design(spec, n, p, rep);
    const Simulation sim = generate(design);
    const Datasetd& data = sim.data;
    EmConfig em = spec.em;
    em.seed = design.seed;
    FeatureEmConfig feature = spec.feature;
    feature.threads = 1;

    std::vector<MetricRow> rows;
    auto emit = [&](std::string name, double v) { rows.push_back({n, p, rep, std::move(name), v}); };
    auto emit_log = [&](const std::string& name, double v) {
        emit(name, v);
        emit("log_" + name, std::log(v));
    };

    const bool need_initial = wants(spec, "initial") || wants(spec, "response") ||
                              wants(spec, "posterior") || wants(spec, "final");
    if (need_initial) {
        auto init = fit_initial(data, spec.k, em);
        const Permutation perm = align_labels(init.params, sim.truth.mixture);
        const MixtureParamsd m = permute_classes(init.params, perm);
        if (wants(spec, "initial")) {
            emit_log("err_pi", err_norm(m.priors, sim.truth.mixture.priors));
            emit_log("err_gamma", err_norm(m.intercepts, sim.truth.mixture.intercepts));
            emit_log("err_theta", err_norm(m.slopes, sim.truth.mixture.slopes));
            emit_log("err_sigma2", std::abs(m.noise_var - sim.truth.mixture.noise_var));
        }
        if (wants(spec, "response") || wants(spec, "posterior") || wants(spec, "final")) {
            const ResponseProbsd probs = fit_response_probs(data, m, feature);
            if (wants(spec, "response")) emit_log("maxerr_p", max_err_response(probs, sim.truth.response));
            if (wants(spec, "posterior") || wants(spec, "final")) {
                const PosteriorMatrixd post = posterior_full(data, FullParamsd{m, probs});
                if (wants(spec, "posterior")) {
                    emit_log("maxerr_post", max_err_posterior(post, *data.true_labels));
                    const auto assigned = hard_assign(post);
                    Index hits = 0;
                    for (std::size_t i = 0; i < assigned.size(); ++i)
                        hits += (assigned[i] == (*data.true_labels)[i]);
                    emit("assign_accuracy", double(hits) / double(n));
                }
                if (wants(spec, "final")) {
                    const FinalFitd real = fit_final(data, post);
                    const FinalFitd oracle = fit_oracle(data, spec.k);
                    emit_log("diff", diff_real_oracle(real, oracle));
                }
            }
        }
    }
    if (wants(spec, "select_k")) {
        const SelectKResult sel = select_k(data, spec.k_max, em, feature);
        emit("k_hat", double(sel.k_hat));
        emit("k_correct", sel.k_hat == design.k ? 1.0 : 0.0);
    }
    if (wants(spec, "prediction")) {
        const Index half = n / 2;
        const Datasetd train = slice_rows(data, 0, half);
        const Datasetd test = slice_rows(data, half, n);
        const McrFitd fit = fit_mcr(train, spec.k, em, feature);
        emit("or_mcr", out_of_sample_r2(test.y, predict(test, fit.final_fit, fit.final_params())));
        emit("or_ols", out_of_sample_r2(test.y, ols_predict(train, test)));
    }
    return rows;
}

HarnessResult run_harness(const HarnessSpec& spec, unsigned jobs) {
    validate(spec);
    struct Task {
        Index n, p;
        int rep;
        std::vector<MetricRow> rows;
        std::string error;
    };
    std::vector<Task> tasks;
    for (const auto& [n, p] : harness_cells(spec))
        for (int r = 1; r <= spec.reps; ++r) tasks.push_back({n, p, r, {}, {}});

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t; (t = next.fetch_add(1)) < tasks.size();) {
            Task& task = tasks[t];
            try {
                task.rows = run_replication(spec, task.n, task.p, task.rep);
            } catch (const std::exception& e) {
                task.rows.clear();
                task.error = e.what();
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(jobs, unsigned(tasks.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    }

    HarnessResult out;
    std::map<std::pair<Index, Index>, std::pair<int, int>> recovery;
    for (const Task& task : tasks) {
        if (!task.error.empty()) {
            out.rows.push_back({task.n, task.p, task.rep, "failed", 1.0});
            out.failures.push_back("n=" + std::to_string(task.n) + ",p=" + std::to_string(task.p) +
                                   ",rep=" + std::to_string(task.rep) + ": " + task.error);
            continue;
        }
        for (const MetricRow& r : task.rows) {
            if (r.metric == "k_correct") {
                auto& [hit, total] = recovery[{r.n, r.p}];
                hit += int(r.value);
                ++total;
            }
            out.rows.push_back(r);
        }
    }
    // Summary rows sort ahead of the replications of their cell.
    for (const auto& [cell, counts] : recovery) {
        out.rows.push_back({cell.first, cell.second, 0, "k_recovery_pct",
                            100.0 * double(counts.first) / double(counts.second)});
    }
    std::stable_sort(out.rows.begin(), out.rows.end(), [](const MetricRow& a, const MetricRow& b) {
        return std::tie(a.n, a.p, a.rep) < std::tie(b.n, b.p, b.rep);
    });
    return out;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
    os << "n,p,rep,metric,value\n";
    for (const MetricRow& r : rows) {
        os << r.n << ',' << r.p << ',' << r.rep << ',' << r.metric << ',' << io::format_double(r.value) << '\n';
    }
}

}  // namespace mcr
