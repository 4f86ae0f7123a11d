#pragma once

// Shared fixtures and independent reference computations. The oracles here
// deliberately avoid the library's numerics: plain loops, products in linear
// space, normal equations instead of QR.

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <numbers>
#include <string>
#include <vector>

#include "mcr/mcr.hpp"

namespace testing {

using mcr::Index;
using Vec = mcr::Vector<double>;
using Mat = mcr::Matrix<double>;

inline Vec vec(std::initializer_list<double> v) {
    Vec out(Index(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

inline mcr::SparseBinary<double> sparse_from_dense(const Mat& dense) {
    std::vector<Eigen::Triplet<double>> t;
    for (Index i = 0; i < dense.rows(); ++i)
        for (Index j = 0; j < dense.cols(); ++j)
            if (dense(i, j) != 0) t.emplace_back(i, j, dense(i, j));
    mcr::SparseBinary<double> z(dense.rows(), dense.cols());
    z.setFromTriplets(t.begin(), t.end());
    z.makeCompressed();
    return z;
}

inline Mat dense(const mcr::SparseBinary<double>& z) { return Mat(z); }

/// Random small instance: K latent classes with separated intercepts, q
/// standard normal covariates and p binary features.
struct Instance {
    mcr::Datasetd data;
    mcr::FullParamsd truth;
};

inline Instance random_instance(std::uint64_t seed, Index n, Index k, Index q, Index p,
                                double noise_sd = 1.0) {
    mcr::Rng rng(seed);
    auto normal = [&] { return rng.normal(); };
    Instance inst;
    auto& m = inst.truth.mixture;
    m.priors = Vec::Constant(k, 1.0 / double(k));
    m.intercepts.resize(k);
    for (Index c = 0; c < k; ++c) m.intercepts(c) = 3.0 * double(c) + 0.3 * normal();
    m.slopes.resize(q);
    for (Index a = 0; a < q; ++a) m.slopes(a) = normal();
    m.noise_var = noise_sd * noise_sd;
    inst.truth.response.probs.resize(k, p);
    for (Index c = 0; c < k; ++c)
        for (Index j = 0; j < p; ++j) inst.truth.response.probs(c, j) = rng.uniform(0.05, 0.95);

    auto& d = inst.data;
    d.y.resize(n);
    d.x.resize(n, q);
    Mat zd = Mat::Zero(n, p);
    std::vector<Index> labels(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        // Every class is represented at least once.
        const Index lab = i < k ? i : std::min(k - 1, Index(rng.uniform() * double(k)));
        labels[std::size_t(i)] = lab;
        for (Index a = 0; a < q; ++a) d.x(i, a) = normal();
        d.y(i) = m.intercepts(lab) + noise_sd * normal();
        if (q > 0) d.y(i) += d.x.row(i).dot(m.slopes);
        for (Index j = 0; j < p; ++j) zd(i, j) = rng.uniform() < inst.truth.response.probs(lab, j) ? 1.0 : 0.0;
    }
    d.z = sparse_from_dense(zd);
    d.true_labels = labels;
    return inst;
}

// ---------------------------------------------------------------------------
// Naive likelihood / posterior arithmetic

inline double normal_density(double y, double mean, double var) {
    return std::exp(-(y - mean) * (y - mean) / (2 * var)) / std::sqrt(2 * std::numbers::pi * var);
}

inline double naive_gaussian(const mcr::Datasetd& d, const mcr::MixtureParamsd& m, Index i, Index c) {
    double mean = m.intercepts(c);
    for (Index a = 0; a < d.q(); ++a) mean += d.x(i, a) * m.slopes(a);
    return m.priors(c) * normal_density(d.y(i), mean, m.noise_var);
}

inline double naive_bernoulli(const Mat& z, const mcr::ResponseProbsd& r, Index i, Index c) {
    double prod = 1;
    for (Index j = 0; j < z.cols(); ++j) prod *= z(i, j) != 0 ? r.probs(c, j) : 1 - r.probs(c, j);
    return prod;
}

inline double naive_loglik_limited(const mcr::Datasetd& d, const mcr::MixtureParamsd& m) {
    double total = 0;
    for (Index i = 0; i < d.n(); ++i) {
        double s = 0;
        for (Index c = 0; c < m.k(); ++c) s += naive_gaussian(d, m, i, c);
        total += std::log(s);
    }
    return total;
}

/// Per-feature likelihood of feature j with the Gaussian block fixed.
inline double naive_loglik_feature(const mcr::Datasetd& d, const mcr::MixtureParamsd& m, Index j,
                                   const Vec& pj) {
    const Mat z = dense(d.z);
    double total = 0;
    for (Index i = 0; i < d.n(); ++i) {
        double s = 0;
        for (Index c = 0; c < m.k(); ++c)
            s += naive_gaussian(d, m, i, c) * (z(i, j) != 0 ? pj(c) : 1 - pj(c));
        total += std::log(s);
    }
    return total;
}

inline Mat naive_posterior_full(const mcr::Datasetd& d, const mcr::FullParamsd& f) {
    const Mat z = dense(d.z);
    Mat w(d.n(), f.k());
    for (Index i = 0; i < d.n(); ++i) {
        for (Index c = 0; c < f.k(); ++c)
            w(i, c) = naive_gaussian(d, f.mixture, i, c) * naive_bernoulli(z, f.response, i, c);
        w.row(i) /= w.row(i).sum();
    }
    return w;
}

inline Vec naive_features_only(const Vec& z_row, const mcr::FullParamsd& f) {
    Vec w(f.k());
    for (Index c = 0; c < f.k(); ++c) {
        double prod = f.mixture.priors(c);
        for (Index j = 0; j < z_row.size(); ++j) prod *= z_row(j) != 0 ? f.response.probs(c, j) : 1 - f.response.probs(c, j);
        w(c) = prod;
    }
    return w / w.sum();
}

// ---------------------------------------------------------------------------
// Normal-equation OLS

struct NaiveOls {
    Vec coef;
    double sigma2 = 0;
    Mat gram_inv;
    Vec se;
};

inline NaiveOls naive_ols(const Mat& design, const Vec& y) {
    const Index n = design.rows();
    Mat g = Mat::Zero(design.cols(), design.cols());
    Vec b = Vec::Zero(design.cols());
    for (Index i = 0; i < n; ++i) {
        for (Index a = 0; a < design.cols(); ++a) {
            b(a) += design(i, a) * y(i);
            for (Index c = 0; c < design.cols(); ++c) g(a, c) += design(i, a) * design(i, c);
        }
    }
    NaiveOls out;
    out.gram_inv = g.ldlt().solve(Mat::Identity(g.rows(), g.cols()));
    out.coef = out.gram_inv * b;
    double rss = 0;
    for (Index i = 0; i < n; ++i) {
        const double r = y(i) - design.row(i).dot(out.coef);
        rss += r * r;
    }
    out.sigma2 = rss / double(n);
    out.se = (out.sigma2 * out.gram_inv.diagonal().array()).sqrt().matrix();
    return out;
}

// ---------------------------------------------------------------------------

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("mcr_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Coarse-to-fine grid search of the per-feature likelihood, K <= 3.
inline double grid_max(const mcr::Datasetd& d, const mcr::MixtureParamsd& m, Index j, double lo, double hi) {
    const Index k = m.k();
    const int steps = k == 1 ? 2000 : (k == 2 ? 200 : 40);
    Vec center = Vec::Constant(k, 0.5);
    double half = 0.5;
    double best = -std::numeric_limits<double>::infinity();
    for (int level = 0; level < 12; ++level) {
        Vec best_p = center;
        std::vector<int> idx(static_cast<std::size_t>(k), 0);
        while (true) {
            Vec p(k);
            for (Index c = 0; c < k; ++c) {
                const double v = center(c) - half + 2 * half * double(idx[std::size_t(c)]) / steps;
                p(c) = std::clamp(v, lo, hi);
            }
            const double val = naive_loglik_feature(d, m, j, p);
            if (val > best) {
                best = val;
                best_p = p;
            }
            Index c = 0;
            while (c < k && ++idx[std::size_t(c)] > steps) idx[std::size_t(c++)] = 0;
            if (c == k) break;
        }
        center = best_p;
        half *= 4.0 / steps;
        if (half < 1e-12) break;
    }
    return best;
}

struct OracleSplit {
    std::vector<Index> selected;
    std::vector<double> path;
};

// Forward selection by BIC on the normal equations, columns screened by a
// two-pass Pearson correlation.
inline OracleSplit forward_bic_oracle(const Vec& y, const Mat& x1, const Mat& z, Index max_selected) {
    const Index n = y.size();
    std::vector<double> corr(static_cast<std::size_t>(z.cols()));
    const double ybar = y.mean();
    for (Index j = 0; j < z.cols(); ++j) {
        const double zbar = z.col(j).mean();
        double sxy = 0, sxx = 0, syy = 0;
        for (Index i = 0; i < n; ++i) {
            sxy += (z(i, j) - zbar) * (y(i) - ybar);
            sxx += (z(i, j) - zbar) * (z(i, j) - zbar);
            syy += (y(i) - ybar) * (y(i) - ybar);
        }
        corr[std::size_t(j)] = sxx > 0 ? std::abs(sxy) / std::sqrt(sxx * syy) : 0.0;
    }
    std::vector<Index> order(static_cast<std::size_t>(z.cols()));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return corr[std::size_t(a)] > corr[std::size_t(b)]; });

    auto bic_of = [&](const Mat& d, bool& ok) {
        const Mat g = d.transpose() * d;
        Eigen::FullPivLU<Mat> lu(g);
        lu.setThreshold(1e-10);
        ok = lu.rank() == g.cols();
        if (!ok) return 0.0;
        const Vec beta = lu.solve(d.transpose() * y);
        const double rss = (y - d * beta).squaredNorm();
        const double loglik = -0.5 * double(n) * (std::log(2 * std::numbers::pi) + std::log(rss / double(n)) + 1);
        return -2 * loglik + double(d.cols() + 1) * std::log(double(n));
    };
    Mat design(n, 1 + x1.cols());
    design << Vec::Ones(n), x1;
    bool ok = true;
    OracleSplit out;
    double best = bic_of(design, ok);
    out.path.push_back(best);
    for (Index j : order) {
        if (Index(out.selected.size()) >= max_selected) break;
        Mat trial(n, design.cols() + 1);
        trial << design, z.col(j);
        const double v = bic_of(trial, ok);
        if (!ok) continue;
        if (!(v < best)) break;
        best = v;
        design = trial;
        out.selected.push_back(j);
        out.path.push_back(v);
    }
    return out;
}

// Regression of y on two covariates and a few of `cols` binary columns.
struct SplitInstance {
    Vec y;
    Mat x1;
    Mat z;
};

inline SplitInstance split_instance(std::uint64_t seed, Index n, Index cols, bool duplicate) {
    mcr::Rng rng(seed);
    SplitInstance s;
    s.x1.resize(n, 2);
    s.z.resize(n, cols);
    for (Index i = 0; i < n; ++i) {
        s.x1(i, 0) = rng.normal();
        s.x1(i, 1) = rng.normal();
        for (Index j = 0; j < cols; ++j) s.z(i, j) = rng.uniform() < 0.3 + 0.02 * double(j) ? 1 : 0;
    }
    if (duplicate) s.z.col(cols - 1) = s.z.col(0);
    s.y = (1.0 + 0.5 * s.x1.col(0).array() - 0.3 * s.x1.col(1).array()).matrix();
    for (Index i = 0; i < n; ++i) {
        s.y(i) += 1.5 * s.z(i, 0) - 1.0 * s.z(i, 3) + 0.6 * s.z(i, 7) + 0.25 * s.z(i, 11) + rng.normal();
    }
    return s;
}

}  // namespace testing
