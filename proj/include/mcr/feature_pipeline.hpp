#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "mcr/numerics.hpp"
#include "mcr/types.hpp"

namespace mcr {

template <typename Scalar>
struct Binarized {
    SparseBinary<Scalar> z;
    /// Original term id of each kept column.
    std::vector<Index> kept_terms;
};

/// Keeps terms whose total count exceeds `min_total_freq` and that are not in
/// the stoplist, and replaces counts by presence indicators.
template <typename Scalar>
Binarized<Scalar> binarize(const Eigen::SparseMatrix<Scalar, Eigen::ColMajor>& counts,
                           Index min_total_freq, const std::set<Index>& stoplist = {}) {
    Binarized<Scalar> out;
    std::vector<Eigen::Triplet<Scalar>> ones;
    for (Index term = 0; term < counts.outerSize(); ++term) {
        Scalar total(0);
        for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(counts, term); it; ++it) {
            detail::require(it.value() >= Scalar(0) && std::floor(it.value()) == it.value(),
                            "counts must be nonnegative integers");
            total += it.value();
        }
        if (total <= Scalar(min_total_freq) || stoplist.count(term)) continue;
        const Index col = Index(out.kept_terms.size());
        out.kept_terms.push_back(term);
        for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(counts, term); it; ++it) {
            if (it.value() > Scalar(0)) ones.emplace_back(it.row(), col, Scalar(1));
        }
    }
    if (out.kept_terms.empty()) throw EmptyVocabulary("binarize: no term survives the filters");
    out.z.resize(counts.rows(), Index(out.kept_terms.size()));
    out.z.setFromTriplets(ones.begin(), ones.end());
    out.z.makeCompressed();
    return out;
}

/// Gaussian-likelihood BIC of an OLS fit with intercept:
/// n log(RSS / n) + n (1 + log 2 pi) + (#coefficients + 1) log n.
template <typename Scalar>
Scalar ols_bic(Scalar rss, Index n, Index n_coef) {
    const Scalar nf = Scalar(n);
    return nf * std::log(rss / nf) + nf * (Scalar(1) + std::log(Scalar(2) * std::numbers::pi_v<Scalar>)) +
           Scalar(n_coef + 1) * std::log(nf);
}

template <typename Scalar>
struct ControlSplit {
    Matrix<Scalar> x;
    SparseBinary<Scalar> z;
    /// Columns of z_full moved into x, in order of selection.
    std::vector<Index> selected;
    /// Columns of z_full kept as features, ascending.
    std::vector<Index> remainder;
    /// Candidates skipped because they made the design rank deficient.
    std::vector<Index> skipped_singular;
    /// BIC of the base model followed by each accepted step.
    std::vector<Scalar> bic_path;
};

/// Absolute sample correlation of each column with y; zero for constant columns.
template <typename Scalar>
Vector<Scalar> abs_correlations(const Vector<Scalar>& y, const SparseBinary<Scalar>& z) {
    const Index n = y.size();
    const Scalar nf = Scalar(n);
    const Scalar ybar = y.mean();
    const Scalar syy = (y.array() - ybar).square().sum();
    Vector<Scalar> out(z.cols());
    for (Index j = 0; j < z.cols(); ++j) {
        Scalar count(0), ysum(0);
        for (typename SparseBinary<Scalar>::InnerIterator it(z, j); it; ++it) {
            count += it.value();
            ysum += it.value() * y(it.row());
        }
        const Scalar zbar = count / nf;
        const Scalar szz = count - nf * zbar * zbar;
        const Scalar szy = ysum - nf * zbar * ybar;
        out(j) = (szz <= Scalar(0) || syy <= Scalar(0)) ? Scalar(0)
                                                        : std::abs(szy) / std::sqrt(szz * syy);
    }
    return out;
}

/// Moves the keywords most correlated with y into the covariate block.
///
/// Columns are ranked by |corr(z_j, y)| (ties: lower index first) and added in
/// that order to the OLS of y on (1, x1, selected) while the OLS BIC strictly
/// decreases, stopping at the first non-improvement or at `max_selected`.
template <typename Scalar>
ControlSplit<Scalar> split_controls(const Vector<Scalar>& y, const Matrix<Scalar>& x1,
                                    const SparseBinary<Scalar>& z_full, Index max_selected = 200) {
    const Index n = y.size();
    detail::require_dims(x1.rows() == n, "split_controls: x1 rows != n");
    detail::require_dims(z_full.rows() == n, "split_controls: z rows != n");
    const Index q1 = x1.cols();

    const Vector<Scalar> corr = abs_correlations(y, z_full);
    std::vector<Index> order(static_cast<std::size_t>(z_full.cols()));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return corr(a) > corr(b); });

    auto dense_col = [&](Index j) {
        Vector<Scalar> c = Vector<Scalar>::Zero(n);
        for (typename SparseBinary<Scalar>::InnerIterator it(z_full, j); it; ++it) c(it.row()) = it.value();
        return c;
    };

    Matrix<Scalar> design(n, 1 + q1);
    design.col(0).setOnes();
    design.rightCols(q1) = x1;
    auto rss_of = [&](const Matrix<Scalar>& d, bool& ok) {
        const LeastSquares<Scalar> ls(d);
        ok = ls.full_rank();
        if (!ok) return Scalar(0);
        return (y - d * ls.solve(y)).squaredNorm();
    };

    ControlSplit<Scalar> out;
    bool ok = true;
    Scalar best = ols_bic(rss_of(design, ok), n, design.cols());
    if (!ok) throw SingularDesign("split_controls: base design (1, x1) is rank deficient");
    out.bic_path.push_back(best);

    for (Index j : order) {
        if (Index(out.selected.size()) >= max_selected || design.cols() + 1 >= n) break;
        Matrix<Scalar> trial(n, design.cols() + 1);
        trial << design, dense_col(j);
        const Scalar rss = rss_of(trial, ok);
        if (!ok) {
            out.skipped_singular.push_back(j);
            continue;
        }
        const Scalar value = ols_bic(rss, n, trial.cols());
        if (!(value < best)) break;
        best = value;
        design = std::move(trial);
        out.selected.push_back(j);
        out.bic_path.push_back(value);
    }

    std::vector<char> taken(std::size_t(z_full.cols()), 0);
    for (Index j : out.selected) taken[std::size_t(j)] = 1;
    for (Index j = 0; j < z_full.cols(); ++j)
        if (!taken[std::size_t(j)]) out.remainder.push_back(j);

    out.x.resize(n, q1 + Index(out.selected.size()));
    out.x.leftCols(q1) = x1;
    for (std::size_t s = 0; s < out.selected.size(); ++s) out.x.col(q1 + Index(s)) = dense_col(out.selected[s]);

    std::vector<Eigen::Triplet<Scalar>> ones;
    for (std::size_t c = 0; c < out.remainder.size(); ++c) {
        for (typename SparseBinary<Scalar>::InnerIterator it(z_full, out.remainder[c]); it; ++it)
            ones.emplace_back(it.row(), Index(c), it.value());
    }
    out.z.resize(n, Index(out.remainder.size()));
    out.z.setFromTriplets(ones.begin(), ones.end());
    out.z.makeCompressed();
    return out;
}

}  // namespace mcr
