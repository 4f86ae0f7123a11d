#include "mcr/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "mcr/harness.hpp"
#include "mcr/io.hpp"
#include "mcr/mcr.hpp"

namespace mcr::cli {

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e)) return kIo;
    if (dynamic_cast<const SingularDesign*>(&e) || dynamic_cast<const DegenerateWeights*>(&e) ||
        dynamic_cast<const ZeroVariance*>(&e))
        return kNumerical;
    if (dynamic_cast<const Error*>(&e) || dynamic_cast<const nlohmann::json::exception*>(&e) ||
        dynamic_cast<const CLI::Error*>(&e))
        return kValidation;
    return kInternal;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file: " + path.string());
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    std::map<std::string, std::string> kv;
    std::string line;
    for (int lineno = 1; std::getline(is, line); ++lineno) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw SchemaMismatch(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::replace(key.begin(), key.end(), '_', '-');
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (key.empty())
            throw SchemaMismatch(path.string() + ":" + std::to_string(lineno) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

namespace {

// ---------------------------------------------------------------------------
// Options

struct EstimationOptions {
    std::uint64_t seed = EmConfig{}.seed;
    int max_iters = EmConfig{}.max_iters;
    double tol = EmConfig{}.rel_tol;
    int starts = EmConfig{}.n_starts;
    bool sequential = false;
    int feature_max_iters = FeatureEmConfig{}.max_iters;
    double feature_tol = FeatureEmConfig{}.tol;
    unsigned threads = 1;

    EmConfig em() const {
        EmConfig c;
        c.seed = seed;
        c.max_iters = max_iters;
        c.rel_tol = tol;
        c.n_starts = starts;
        c.sequential_updates = sequential;
        return c;
    }
    FeatureEmConfig feature() const {
        FeatureEmConfig c;
        c.max_iters = feature_max_iters;
        c.tol = feature_tol;
        c.threads = threads;
        return c;
    }
};

struct Options {
    std::string config;

    struct {
        Index n = 0, p = 0;
        int reps = 1;
        std::uint64_t seed = EmConfig{}.seed;
        std::optional<std::uint64_t> probs_seed;
        std::string out;
    } simulate;

    struct {
        std::string data, truth, out, report = "-";
        Index k = 0;
        bool select_k = false;
        Index k_max = 10;
        EstimationOptions est;
    } fit;

    struct {
        std::string model, data, out;
    } predict;

    struct {
        std::string spec, out = "-";
        std::vector<Index> n, p;
        std::optional<double> p_over_n;
        int reps = 1;
        std::vector<std::string> metrics;
        Index k = 5, k_max = 10;
        unsigned jobs = 1;
        EstimationOptions est;
        std::optional<std::uint64_t> probs_seed;
    } harness;

    struct {
        std::string data, out, report;
        Index max_selected = 200;
    } split;

    struct {
        std::string counts, stoplist, out, kept, dataset, out_dataset;
        Index min_freq = 10;
    } binarize;
};

void add_estimation_options(CLI::App* sub, EstimationOptions& o, std::set<std::string>& flags) {
    sub->add_option("--seed", o.seed, "Base seed (default: $MCR_SEED, else 20240101)");
    sub->add_option("--max-iters", o.max_iters, "EM iteration cap")->capture_default_str();
    sub->add_option("--tol", o.tol, "Relative log-likelihood tolerance")->capture_default_str();
    sub->add_option("--starts", o.starts, "EM starts")->capture_default_str();
    sub->add_flag("--sequential", o.sequential, "Update slopes after intercepts within a step");
    flags.insert("sequential");
    sub->add_option("--feature-max-iters", o.feature_max_iters, "Per-feature EM iteration cap")
        ->capture_default_str();
    sub->add_option("--feature-tol", o.feature_tol, "Per-feature EM tolerance")->capture_default_str();
    sub->add_option("--threads", o.threads, "Threads for the per-feature EM")->capture_default_str();
}

struct Cli {
    CLI::App app{"Mixture conditional regression: estimation, model selection and simulation"};
    Options o;
    std::set<std::string> flags;
    CLI::App* simulate;
    CLI::App* fit;
    CLI::App* select;
    CLI::App* predict;
    CLI::App* harness;
    CLI::App* split;
    CLI::App* binarize;

    // The probe pass only locates --config, so nothing is required there.
    explicit Cli(bool probe = false) {
        const bool strict = !probe;
        app.set_help_all_flag("--help-all");
        app.require_subcommand(1);
        app.add_option("--config", o.config, "Flat key = value file of option defaults");

        simulate = app.add_subcommand("simulate", "Draw datasets from the default simulation design");
        simulate->add_option("--n", o.simulate.n, "Observations")->required(strict);
        simulate->add_option("--p", o.simulate.p, "Binary features")->required(strict);
        simulate->add_option("--reps", o.simulate.reps, "Replications")->capture_default_str();
        simulate->add_option("--seed", o.simulate.seed, "Base seed (default: $MCR_SEED)");
        simulate->add_option("--probs-seed", o.simulate.probs_seed, "Share one response-probability draw");
        simulate->add_option("--out", o.simulate.out, "Output directory")->required(strict);

        auto fit_options = [&](CLI::App* sub) {
            sub->add_option("--data", o.fit.data, "Dataset file")->required(strict);
            sub->add_option("--k", o.fit.k, "Number of classes");
            sub->add_option("--k-max", o.fit.k_max, "Largest K tried by --select-k")->capture_default_str();
            sub->add_option("--truth", o.fit.truth, "Truth file from `simulate` for error metrics");
            sub->add_option("--out", o.fit.out, "Model file to write");
            sub->add_option("--report", o.fit.report, "Report destination ('-' = stdout)")->capture_default_str();
            add_estimation_options(sub, o.fit.est, flags);
        };
        fit = app.add_subcommand("fit", "Fit the model for a given K or select K by BIC");
        fit_options(fit);
        fit->add_flag("--select-k", o.fit.select_k, "Choose K in 1..k-max by BIC");
        flags.insert("select-k");
        select = app.add_subcommand("select-k", "Same as `fit --select-k`");
        fit_options(select);

        predict = app.add_subcommand("predict", "Predict responses from the binary features and covariates");
        predict->add_option("--model", o.predict.model, "Model file")->required(strict);
        predict->add_option("--data", o.predict.data, "Dataset file")->required(strict);
        predict->add_option("--out", o.predict.out, "Predictions CSV");

        harness = app.add_subcommand("harness", "Monte-Carlo replication grid");
        harness->add_option("--spec", o.harness.spec, "JSON experiment spec; flags override it");
        harness->add_option("--n", o.harness.n, "Sample sizes")->delimiter(',');
        harness->add_option("--p", o.harness.p, "Feature counts")->delimiter(',');
        harness->add_option("--p-over-n", o.harness.p_over_n, "p as a fraction of n");
        harness->add_option("--reps", o.harness.reps, "Replications per cell");
        harness->add_option("--metrics", o.harness.metrics,
                            "Metric groups: initial,response,posterior,final,select_k,prediction")
            ->delimiter(',');
        harness->add_option("--k", o.harness.k, "Classes fitted");
        harness->add_option("--k-max", o.harness.k_max, "Largest K for select_k");
        harness->add_option("--probs-seed", o.harness.probs_seed, "Share one response-probability draw");
        harness->add_option("--jobs", o.harness.jobs, "Concurrent replications")->capture_default_str();
        harness->add_option("--out", o.harness.out, "Metrics CSV ('-' = stdout)")->capture_default_str();
        add_estimation_options(harness, o.harness.est, flags);

        split = app.add_subcommand("split-features", "Move the most y-correlated features into the covariates");
        split->add_option("--data", o.split.data, "Dataset with all features in z")->required(strict);
        split->add_option("--max-selected", o.split.max_selected, "Selection cap")->capture_default_str();
        split->add_option("--out", o.split.out, "Output dataset")->required(strict);
        split->add_option("--report", o.split.report, "JSON report of the selection");

        binarize = app.add_subcommand("binarize", "Filter a document-term count matrix into binary features");
        binarize->add_option("--counts", o.binarize.counts, "MatrixMarket count matrix (documents x terms)")
            ->required(strict);
        binarize->add_option("--min-freq", o.binarize.min_freq, "Drop terms with total count <= this")
            ->capture_default_str();
        binarize->add_option("--stoplist", o.binarize.stoplist, "File of 1-based term ids to drop");
        binarize->add_option("--out", o.binarize.out, "Binary MatrixMarket output");
        binarize->add_option("--kept", o.binarize.kept, "Kept term ids (1-based), one per line");
        binarize->add_option("--dataset", o.binarize.dataset, "Dataset whose z is replaced");
        binarize->add_option("--out-dataset", o.binarize.out_dataset, "Where to write that dataset");
    }

    CLI::App* active() const {
        for (auto* s : {simulate, fit, select, predict, harness, split, binarize})
            if (s->parsed()) return s;
        return nullptr;
    }

    std::vector<CLI::App*> subcommands() const { return {simulate, fit, select, predict, harness, split, binarize}; }
};

void parse_args(Cli& cli, std::vector<std::string> args) {
    std::reverse(args.begin(), args.end());
    cli.app.parse(args);
}

// Appends config file entries for options not given on the command line.
std::vector<std::string> merge_config(const std::vector<std::string>& args, const Cli& probe) {
    if (probe.o.config.empty()) return args;
    const auto kv = read_config_file(probe.o.config);
    CLI::App* sub = probe.active();
    std::vector<std::string> merged = args;
    for (const auto& [key, value] : kv) {
        const std::string name = "--" + key;
        bool known = false;
        for (auto* s : probe.subcommands()) known = known || s->get_option_no_throw(name) != nullptr;
        if (!known) throw SchemaMismatch(probe.o.config + ": unknown option '" + key + "'");
        const CLI::Option* opt = sub->get_option_no_throw(name);
        if (!opt || opt->count() > 0) continue;
        if (probe.flags.count(key)) {
            if (value == "true" || value == "1" || value == "yes" || value == "on") merged.push_back(name);
            else if (!(value == "false" || value == "0" || value == "no" || value == "off"))
                throw SchemaMismatch(probe.o.config + ": '" + key + "' expects a boolean");
        } else {
            merged.push_back(name);
            merged.push_back(value);
        }
    }
    return merged;
}

std::uint64_t parse_seed(const std::string& text, const std::string& what) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw InvariantViolation(what + ": not an unsigned integer: '" + text + "'");
    return v;
}

void apply_env_seed(CLI::App* sub, std::uint64_t& seed) {
    const CLI::Option* opt = sub->get_option_no_throw("--seed");
    if (!opt || opt->count() > 0) return;
    if (const char* env = std::getenv("MCR_SEED"); env && *env) seed = parse_seed(env, "MCR_SEED");
}

// ---------------------------------------------------------------------------
// Output helpers

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << text;
    if (!os) throw IoError("write failed: " + path);
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string pvalue_text(double p) { return p < 1e-16 ? "<1e-16" : fmt("%.4g", p); }

std::string rep_stem(int rep) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "rep%04d", rep);
    return buf;
}

io::NamedDataset load_named(const std::string& path) { return io::load_dataset(path); }

struct Truth {
    FullParamsd params;
};

Truth load_truth(const std::string& path) {
    const auto j = io::load_json(path);
    try {
        if (j.value("format", "") != "mcr-truth") throw SchemaMismatch(path + ": not an mcr-truth file");
        return {io::full_params_from_json(j.at("params"))};
    } catch (const nlohmann::json::exception& e) {
        throw SchemaMismatch(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Commands

int cmd_simulate(const Options& o, std::ostream& out) {
    const auto& s = o.simulate;
    detail::require(s.reps >= 1, "--reps must be >= 1");
    std::error_code ec;
    std::filesystem::create_directories(s.out, ec);
    if (ec) throw IoError("cannot create directory " + s.out + ": " + ec.message());
    for (int rep = 1; rep <= s.reps; ++rep) {
        SimDesign d = default_design(s.n, s.p, replication_seed(s.seed, s.n, s.p, rep));
        d.probs_seed = s.probs_seed;
        const Simulation sim = generate(d);
        const auto base = std::filesystem::path(s.out) / rep_stem(rep);
        io::save_dataset(base.string() + ".dataset.json", sim.data);
        nlohmann::json truth = {{"format", "mcr-truth"}, {"version", 1}, {"seed", d.seed},
                                {"n", d.n},              {"p", d.p},     {"params", io::to_json(sim.truth)}};
        if (d.probs_seed) truth["probs_seed"] = *d.probs_seed;
        io::save_json(base.string() + ".truth.json", truth);
    }
    out << "wrote " << s.reps << " replication(s) to " << s.out << "\n";
    return kOk;
}

std::string fit_report(const io::ModelFile& m, const Datasetd& data, const std::optional<Truth>& truth,
                       const PosteriorMatrixd& posterior) {
    std::ostringstream r;
    r << "MCR fit: n = " << data.n() << ", p = " << m.p << ", q = " << m.q << ", K = " << m.k << "\n";
    if (m.k_hat) {
        r << "K selected by BIC over 1.." << m.bic_values.size() << ":";
        for (double v : m.bic_values) r << " " << (std::isfinite(v) ? fmt("%.2f", v) : std::string("failed"));
        r << "\n";
    }
    r << "initial EM: start " << m.trace.start_index << ", " << m.trace.iterations << " iterations, "
      << (m.trace.converged ? "converged" : "NOT converged") << ", log-likelihood "
      << fmt("%.6f", m.loglik_limited) << "\n";
    r << "BIC " << fmt("%.4f", m.bic) << "\n\n";

    char line[160];
    std::snprintf(line, sizeof line, "%-16s %14s %12s %10s\n", "", "Estimate", "SE", "P-value");
    r << line;
    const auto& f = m.final_fit;
    for (Index c = 0; c < f.phi.size(); ++c) {
        const std::string name =
            c < m.k ? "class" + std::to_string(c + 1) : m.x_names[std::size_t(c - m.k)];
        std::snprintf(line, sizeof line, "%-16s %14.6f %12.6f %10s\n", name.c_str(), f.phi(c), f.se(c),
                      pvalue_text(f.p_values(c)).c_str());
        r << line;
    }
    std::snprintf(line, sizeof line, "%-16s %14.6f\n", "sigma2", f.noise_var);
    r << line;
    for (Index c = 0; c < m.k; ++c) {
        std::snprintf(line, sizeof line, "%-16s %14.6f\n", ("prior" + std::to_string(c + 1)).c_str(),
                      f.priors(c));
        r << line;
    }

    if (truth) {
        const MixtureParamsd& t = truth->params.mixture;
        if (t.k() != m.k) {
            r << "\ntruth has K = " << t.k() << "; error metrics skipped\n";
            return r.str();
        }
        const Permutation perm = align_labels(m.initial.mixture, t);
        const MixtureParamsd init = permute_classes(m.initial.mixture, perm);
        const MixtureParamsd fin = permute_classes(f.as_mixture(), perm);
        r << "\nErrors against truth (classes aligned by intercept)\n";
        std::snprintf(line, sizeof line, "%-16s %14s %14s\n", "", "initial", "final");
        r << line;
        auto row = [&](const char* name, double a, double b) {
            std::snprintf(line, sizeof line, "%-16s %14.6g %14.6g\n", name, a, b);
            r << line;
        };
        row("err_pi", err_norm(init.priors, t.priors), err_norm(fin.priors, t.priors));
        row("err_gamma", err_norm(init.intercepts, t.intercepts), err_norm(fin.intercepts, t.intercepts));
        row("err_theta", err_norm(init.slopes, t.slopes), err_norm(fin.slopes, t.slopes));
        row("err_sigma2", std::abs(init.noise_var - t.noise_var), std::abs(fin.noise_var - t.noise_var));
        if (truth->params.response.p() == m.p && m.p > 0) {
            const ResponseProbsd probs = permute_classes(m.initial.response, perm);
            r << "maxerr_p         " << fmt("%14.6g", max_err_response(probs, truth->params.response)) << "\n";
        }
        if (data.true_labels) {
            const PosteriorMatrixd aligned = permute_classes(posterior, perm);
            r << "maxerr_post      " << fmt("%14.6g", max_err_posterior(aligned, *data.true_labels)) << "\n";
            try {
                const FinalFitd oracle = fit_oracle(data, m.k);
                const double diff = (stacked_omega(fin) - stacked_omega(oracle.as_mixture())).norm();
                r << "diff_oracle      " << fmt("%14.6g", diff) << "\n";
            } catch (const Error& e) {
                r << "diff_oracle      unavailable (" << e.what() << ")\n";
            }
        }
    }
    return r.str();
}

int cmd_fit(const Options& o, bool force_select, std::ostream& out, std::ostream& err) {
    const auto& f = o.fit;
    const bool selecting = force_select || f.select_k;
    if (selecting == (f.k > 0))
        throw InvariantViolation(selecting ? "give either --k or --select-k, not both"
                                           : "give --k or --select-k");
    const io::NamedDataset named = load_named(f.data);
    const Datasetd& data = named.data;
    std::optional<Truth> truth;
    if (!f.truth.empty()) truth = load_truth(f.truth);
    const EmConfig em = f.est.em();
    const FeatureEmConfig feature = f.est.feature();
    validate(em);

    io::ModelFile m;
    m.p = data.p();
    m.q = data.q();
    m.x_names = named.x_names;
    if (selecting) {
        const SelectKResult sel = select_k(data, f.k_max, em, feature);
        for (const auto& e : sel.errors)
            if (!e.empty()) err << "warning: " << e << "\n";
        m.k = sel.k_hat;
        m.k_hat = sel.k_hat;
        m.bic_values = sel.bic_values;
        m.initial = *sel.fits[std::size_t(m.k - 1)];
        m.trace = sel.traces[std::size_t(m.k - 1)];
    } else {
        m.k = f.k;
        auto init = fit_initial(data, f.k, em);
        m.trace = init.trace;
        m.initial = {init.params, fit_response_probs(data, init.params, feature)};
    }
    const PosteriorMatrixd post = posterior_full(data, m.initial);
    m.final_fit = fit_final(data, post);
    m.loglik_limited = loglik_limited(data, m.initial.mixture);
    m.bic = bic(data, m.initial);

    if (!f.out.empty()) io::save_model(f.out, m);
    write_text(f.report, fit_report(m, data, truth, post), out);
    return kOk;
}

int cmd_predict(const Options& o, std::ostream& out) {
    const io::ModelFile m = io::load_model(o.predict.model);
    const io::NamedDataset named = load_named(o.predict.data);
    const Datasetd& data = named.data;
    if (data.p() != m.p || data.q() != m.q) {
        throw SchemaMismatch("model expects p = " + std::to_string(m.p) + ", q = " + std::to_string(m.q) +
                             "; " + o.predict.data + " has p = " + std::to_string(data.p()) +
                             ", q = " + std::to_string(data.q()));
    }
    const Vector<double> y_hat = predict(data, m.final_fit, m.prediction_params());
    std::string csv = "row,y,y_hat\n";
    for (Index i = 0; i < data.n(); ++i)
        csv += std::to_string(i + 1) + "," + io::format_double(data.y(i)) + "," + io::format_double(y_hat(i)) + "\n";
    if (!o.predict.out.empty()) write_text(o.predict.out, csv, out);
    try {
        out << "OR = " << fmt("%.4f", out_of_sample_r2(data.y, y_hat)) << "%\n";
    } catch (const Error& e) {
        out << "OR unavailable: " << e.what() << "\n";
    }
    return kOk;
}

int cmd_harness(const Options& o, CLI::App* sub, std::ostream& out, std::ostream& err) {
    const auto& h = o.harness;
    HarnessSpec spec;
    bool spec_has_seed = false;
    if (!h.spec.empty()) {
        const auto j = io::load_json(h.spec);
        spec = harness_spec_from_json(j);
        spec_has_seed = j.contains("seed");
    }
    auto given = [&](const char* name) { return sub->get_option(name)->count() > 0; };
    if (given("--n")) spec.n_values = h.n;
    if (given("--p")) {
        spec.p_values = h.p;
        spec.p_over_n.reset();
    }
    if (given("--p-over-n")) {
        spec.p_over_n = h.p_over_n;
        spec.p_values.clear();
    }
    if (given("--reps")) spec.reps = h.reps;
    if (given("--metrics")) spec.metrics = h.metrics;
    if (given("--k")) spec.k = h.k;
    if (given("--k-max")) spec.k_max = h.k_max;
    if (given("--probs-seed")) spec.probs_seed = h.probs_seed;
    // A spec file seed outranks $MCR_SEED but not an explicit --seed.
    if (given("--seed") || !spec_has_seed) spec.seed = h.est.seed;
    if (given("--max-iters")) spec.em.max_iters = h.est.max_iters;
    if (given("--tol")) spec.em.rel_tol = h.est.tol;
    if (given("--starts")) spec.em.n_starts = h.est.starts;
    if (given("--sequential")) spec.em.sequential_updates = h.est.sequential;
    if (given("--feature-max-iters")) spec.feature.max_iters = h.est.feature_max_iters;
    if (given("--feature-tol")) spec.feature.tol = h.est.feature_tol;
    detail::require(h.jobs >= 1, "--jobs must be >= 1");

    const HarnessResult res = run_harness(spec, h.jobs);
    for (const auto& f : res.failures) err << "replication failed: " << f << "\n";
    std::ostringstream csv;
    write_metrics_csv(csv, res.rows);
    write_text(h.out, csv.str(), out);
    const bool all_failed = !res.failures.empty() &&
                            res.failures.size() == harness_cells(spec).size() * std::size_t(spec.reps);
    return all_failed ? kNumerical : kOk;
}

int cmd_split(const Options& o, std::ostream& out) {
    const io::NamedDataset named = load_named(o.split.data);
    const Datasetd& d = named.data;
    const auto split = split_controls(d.y, d.x, d.z, o.split.max_selected);
    Datasetd result;
    result.y = d.y;
    result.x = split.x;
    result.z = split.z;
    result.true_labels = d.true_labels;
    std::vector<std::string> names = named.x_names;
    for (Index j : split.selected) names.push_back("z" + std::to_string(j + 1));
    io::save_dataset(o.split.out, result, names);
    if (!o.split.report.empty()) {
        auto one_based = [](const std::vector<Index>& v) {
            std::vector<Index> w;
            for (Index j : v) w.push_back(j + 1);
            return w;
        };
        io::save_json(o.split.report, {{"selected", one_based(split.selected)},
                                       {"remainder", one_based(split.remainder)},
                                       {"skipped_singular", one_based(split.skipped_singular)},
                                       {"bic_path", split.bic_path}});
    }
    out << "selected " << split.selected.size() << " of " << d.p() << " features into the covariates\n";
    return kOk;
}

std::set<Index> read_stoplist(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open stoplist: " + path);
    std::set<Index> ids;
    std::string line;
    while (std::getline(is, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string tok;
        while (ss >> tok) {
            const Index id = Index(parse_seed(tok, "stoplist " + path));
            detail::require(id >= 1, "stoplist ids are 1-based");
            ids.insert(id - 1);
        }
    }
    return ids;
}

int cmd_binarize(const Options& o, std::ostream& out) {
    const auto& b = o.binarize;
    if (b.dataset.empty() != b.out_dataset.empty())
        throw InvariantViolation("--dataset and --out-dataset go together");
    if (b.out.empty() && b.out_dataset.empty()) throw InvariantViolation("give --out or --out-dataset");
    detail::require(b.min_freq >= 0, "--min-freq must be >= 0");
    const auto counts = io::load_matrix_market(b.counts);
    const std::set<Index> stop = b.stoplist.empty() ? std::set<Index>{} : read_stoplist(b.stoplist);
    const Binarized<double> bin = binarize(counts, b.min_freq, stop);
    if (!b.out.empty()) io::save_matrix_market(b.out, bin.z, true);
    if (!b.kept.empty()) {
        std::string text;
        for (Index t : bin.kept_terms) text += std::to_string(t + 1) + "\n";
        write_text(b.kept, text, out);
    }
    if (!b.dataset.empty()) {
        io::NamedDataset named = load_named(b.dataset);
        if (named.data.n() != bin.z.rows())
            throw SchemaMismatch(b.dataset + " has " + std::to_string(named.data.n()) + " rows, " + b.counts +
                                 " has " + std::to_string(bin.z.rows()));
        named.data.z = bin.z;
        io::save_dataset(b.out_dataset, named.data, named.x_names);
    }
    out << "kept " << bin.kept_terms.size() << " of " << counts.cols() << " terms\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        Cli probe(true);
        try {
            parse_args(probe, args);
        } catch (const CLI::ParseError& e) {
            return probe.app.exit(e, out, err) == 0 ? kOk : kValidation;
        }
        const std::vector<std::string> merged = merge_config(args, probe);
        Cli cli;
        try {
            parse_args(cli, merged);
        } catch (const CLI::ParseError& e) {
            return cli.app.exit(e, out, err) == 0 ? kOk : kValidation;
        }
        CLI::App* sub = cli.active();
        Options& o = cli.o;
        if (sub == cli.simulate) {
            apply_env_seed(sub, o.simulate.seed);
            return cmd_simulate(o, out);
        }
        if (sub == cli.fit || sub == cli.select) {
            apply_env_seed(sub, o.fit.est.seed);
            return cmd_fit(o, sub == cli.select, out, err);
        }
        if (sub == cli.predict) return cmd_predict(o, out);
        if (sub == cli.harness) {
            apply_env_seed(sub, o.harness.est.seed);
            return cmd_harness(o, sub, out, err);
        }
        if (sub == cli.split) return cmd_split(o, out);
        if (sub == cli.binarize) return cmd_binarize(o, out);
        err << "no command given\n";
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace mcr::cli
