#pragma once

#include <Eigen/QR>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "mcr/types.hpp"

namespace mcr {

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& v) {
    using Scalar = typename Derived::Scalar;
    const Scalar m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.derived().array() - m).exp().sum());
}

/// Normalizes each row of a log-weight matrix in place into probabilities and
/// returns the per-row log normalizers.
template <typename Scalar>
Vector<Scalar> normalize_log_rows(Matrix<Scalar>& logw) {
    Vector<Scalar> lse(logw.rows());
    for (Index i = 0; i < logw.rows(); ++i) {
        const Scalar m = logw.row(i).maxCoeff();
        auto row = logw.row(i);
        row.array() = (row.array() - m).exp();
        const Scalar s = row.sum();
        row /= s;
        lse(i) = m + std::log(s);
    }
    return lse;
}

/// n x K matrix of log pi_k + log phi(y_i; gamma_k + x_i' theta, sigma^2).
template <typename Scalar>
Matrix<Scalar> log_gaussian_terms(const Dataset<Scalar>& data, const MixtureParams<Scalar>& m) {
    detail::require_dims(m.q() == data.q(), "slopes length " + std::to_string(m.q()) +
                                                " != q = " + std::to_string(data.q()));
    detail::require_dims(m.intercepts.size() == m.k(), "intercepts length != K");
    const Index n = data.n();
    const Index k = m.k();
    Vector<Scalar> base = data.y;
    if (m.q() > 0) base.noalias() -= data.x * m.slopes;
    const Scalar log_norm =
        Scalar(-0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar> * m.noise_var);
    const Scalar inv2s = Scalar(1) / (Scalar(2) * m.noise_var);
    Matrix<Scalar> out(n, k);
    for (Index c = 0; c < k; ++c) {
        const Scalar lp = std::log(m.priors(c)) + log_norm;
        out.col(c) = lp - (base.array() - m.intercepts(c)).square() * inv2s;
    }
    return out;
}

/// Rank-revealing least squares on a fixed design.
template <typename Scalar>
class LeastSquares {
public:
    LeastSquares() = default;

    explicit LeastSquares(const Matrix<Scalar>& design) : qr_(design) {
        qr_.setThreshold(Scalar(1e-10));
    }

    bool full_rank() const { return qr_.rank() == qr_.cols(); }
    Index rank() const { return qr_.rank(); }

    /// Column indices past the numerical rank in pivot order.
    std::vector<Index> deficient_columns() const {
        std::vector<Index> cols;
        const auto& perm = qr_.colsPermutation().indices();
        for (Index c = qr_.rank(); c < qr_.cols(); ++c) cols.push_back(perm(c));
        return cols;
    }

    template <typename Rhs>
    Vector<Scalar> solve(const Eigen::MatrixBase<Rhs>& rhs) const {
        return qr_.solve(rhs);
    }

    /// (D' D)^{-1} from the triangular factor.
    Matrix<Scalar> gram_inverse() const {
        const Index m = qr_.cols();
        Matrix<Scalar> r = qr_.matrixR().topLeftCorner(m, m).template triangularView<Eigen::Upper>();
        Matrix<Scalar> rinv = Matrix<Scalar>::Identity(m, m);
        r.template triangularView<Eigen::Upper>().solveInPlace(rinv);
        const Matrix<Scalar> inner = rinv * rinv.transpose();
        Matrix<Scalar> out(m, m);
        const auto& perm = qr_.colsPermutation().indices();
        for (Index a = 0; a < m; ++a)
            for (Index b = 0; b < m; ++b) out(perm(a), perm(b)) = inner(a, b);
        return out;
    }

private:
    Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr_;
};

template <typename Scalar>
Scalar normal_two_sided_p(Scalar z) {
    return std::erfc(std::abs(z) / std::numbers::sqrt2_v<Scalar>);
}

/// Type-7 sample quantile of an already sorted vector.
template <typename Scalar>
Scalar sorted_quantile(const std::vector<Scalar>& sorted, Scalar prob) {
    if (sorted.size() == 1) return sorted.front();
    const Scalar h = prob * Scalar(sorted.size() - 1);
    const auto lo = std::size_t(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - Scalar(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace mcr
