#pragma once

// Coefficient-space representation of H^d-valued vectors and of matrix
// operators that are diagonal in a fixed common eigenbasis {phi_k}.
//
// Index convention: the public documentation speaks of k = 1..K_max, the
// containers are 0-based (row k-1 holds the k-th coefficient vector).

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hfanova/errors.hpp"
#include "hfanova/linalg.hpp"
#include "hfanova/series.hpp"

namespace hfanova {

/// Truncated index set of the common eigenbasis.
struct BasisMeta {
    std::size_t k_max = 1;
    std::vector<std::string> labels;  // optional, one per k when present

    BasisMeta() = default;
    explicit BasisMeta(std::size_t k, std::vector<std::string> l = {})
        : k_max(k), labels(std::move(l)) {
        validate();
    }

    void validate() const {
        if (k_max < 1) throw ValidationError("BasisMeta: K_max must be >= 1");
        if (!labels.empty() && labels.size() != k_max) {
            throw DimensionError("BasisMeta: " + std::to_string(labels.size()) +
                                 " labels for K_max=" + std::to_string(k_max));
        }
    }

    friend bool operator==(const BasisMeta&, const BasisMeta&) = default;
};

/// K_max x d matrix of basis coefficients; row k-1 is f_k = (<f_1,phi_k>,...,<f_d,phi_k>).
class CoefficientBlock {
public:
    CoefficientBlock() = default;

    CoefficientBlock(Matrix data, BasisMeta basis) : data_(std::move(data)), basis_(std::move(basis)) {
        basis_.validate();
        if (static_cast<std::size_t>(data_.rows()) != basis_.k_max) {
            throw DimensionError("CoefficientBlock: " + std::to_string(data_.rows()) +
                                 " rows but K_max=" + std::to_string(basis_.k_max));
        }
        if (!data_.allFinite()) throw ValidationError("CoefficientBlock: non-finite entry");
    }

    static CoefficientBlock zeros(const BasisMeta& basis, std::size_t d) {
        return {Matrix::Zero(static_cast<Eigen::Index>(basis.k_max), static_cast<Eigen::Index>(d)),
                basis};
    }

    [[nodiscard]] const Matrix& data() const noexcept { return data_; }
    [[nodiscard]] const BasisMeta& basis() const noexcept { return basis_; }
    [[nodiscard]] std::size_t k_max() const noexcept { return basis_.k_max; }
    [[nodiscard]] std::size_t d() const noexcept { return static_cast<std::size_t>(data_.cols()); }

    /// Coefficient vector for 0-based index `k`.
    [[nodiscard]] Vector row(std::size_t k) const { return data_.row(static_cast<Eigen::Index>(k)).transpose(); }

    /// Squared H^d norm of the truncated vector (Parseval).
    [[nodiscard]] double squared_norm() const { return data_.squaredNorm(); }

private:
    Matrix data_;
    BasisMeta basis_;
};

struct OperatorFlags {
    bool symmetric = false;
    bool positive_definite = false;
};

/// Sequence of K_max r x c matrices sharing the common eigenbasis.
class SpectralMatrixOperator {
public:
    using Flags = OperatorFlags;

    SpectralMatrixOperator() = default;

    SpectralMatrixOperator(std::vector<Matrix> mats, BasisMeta basis, Flags flags = {})
        : mats_(std::move(mats)), basis_(std::move(basis)), flags_(flags) {
        basis_.validate();
        if (mats_.size() != basis_.k_max) {
            throw DimensionError("SpectralMatrixOperator: " + std::to_string(mats_.size()) +
                                 " matrices but K_max=" + std::to_string(basis_.k_max));
        }
        const Eigen::Index r = mats_.front().rows();
        const Eigen::Index c = mats_.front().cols();
        for (std::size_t k = 0; k < mats_.size(); ++k) {
            const Matrix& m = mats_[k];
            if (m.rows() != r || m.cols() != c) {
                throw DimensionError("SpectralMatrixOperator: matrix " + std::to_string(k + 1) +
                                     " has shape " + std::to_string(m.rows()) + "x" +
                                     std::to_string(m.cols()) + ", expected " +
                                     std::to_string(r) + "x" + std::to_string(c));
            }
            if (!m.allFinite()) {
                throw ValidationError("SpectralMatrixOperator: non-finite entry at k=" +
                                      std::to_string(k + 1));
            }
            if (flags_.symmetric && !is_symmetric(m)) {
                throw ValidationError("SpectralMatrixOperator: matrix at k=" + std::to_string(k + 1) +
                                      " is not symmetric");
            }
            if (flags_.positive_definite) {
                const SymmetricEigen eig = symmetric_eigen(m);
                if (!(eig.values(eig.values.size() - 1) > 0.0)) {
                    throw DomainError("SpectralMatrixOperator: matrix at k=" + std::to_string(k + 1) +
                                      " is not positive definite");
                }
            }
        }
    }

    /// Builds mats[k-1] = gen(k) for k = 1..K_max.
    static SpectralMatrixOperator generate(const BasisMeta& basis,
                                           const std::function<Matrix(std::size_t)>& gen,
                                           Flags flags = {}) {
        std::vector<Matrix> mats;
        mats.reserve(basis.k_max);
        for (std::size_t k = 1; k <= basis.k_max; ++k) mats.push_back(gen(k));
        return {std::move(mats), basis, flags};
    }

    static SpectralMatrixOperator identity(const BasisMeta& basis, std::size_t n) {
        const auto dim = static_cast<Eigen::Index>(n);
        return generate(basis, [dim](std::size_t) { return Matrix::Identity(dim, dim); },
                        {true, true});
    }

    [[nodiscard]] const std::vector<Matrix>& mats() const noexcept { return mats_; }
    [[nodiscard]] const Matrix& operator[](std::size_t k) const { return mats_[k]; }
    [[nodiscard]] const BasisMeta& basis() const noexcept { return basis_; }
    [[nodiscard]] std::size_t k_max() const noexcept { return basis_.k_max; }
    [[nodiscard]] std::size_t rows() const noexcept {
        return mats_.empty() ? 0 : static_cast<std::size_t>(mats_.front().rows());
    }
    [[nodiscard]] std::size_t cols() const noexcept {
        return mats_.empty() ? 0 : static_cast<std::size_t>(mats_.front().cols());
    }
    [[nodiscard]] const Flags& flags() const noexcept { return flags_; }

private:
    std::vector<Matrix> mats_;
    BasisMeta basis_;
    Flags flags_;
};

inline void require_same_basis(const BasisMeta& a, const BasisMeta& b, const char* where) {
    if (!(a == b)) {
        throw BasisError(std::string(where) + ": basis mismatch (K_max " + std::to_string(a.k_max) +
                         " vs " + std::to_string(b.k_max) + ")");
    }
}

/// Packs per-k coefficient rows into a block. Lossless.
[[nodiscard]] inline CoefficientBlock project(const std::vector<std::vector<double>>& rows,
                                              std::size_t d, BasisMeta basis) {
    if (rows.empty()) throw DimensionError("project: no rows");
    if (basis.k_max != rows.size()) {
        throw DimensionError("project: " + std::to_string(rows.size()) + " rows for K_max=" +
                             std::to_string(basis.k_max));
    }
    Matrix data(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k].size() != d) {
            throw DimensionError("project: row " + std::to_string(k + 1) + " has width " +
                                 std::to_string(rows[k].size()) + ", expected " + std::to_string(d));
        }
        for (std::size_t i = 0; i < d; ++i) {
            data(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = rows[k][i];
        }
    }
    return {std::move(data), std::move(basis)};
}

[[nodiscard]] inline CoefficientBlock project(const std::vector<std::vector<double>>& rows,
                                              std::size_t d) {
    if (rows.empty()) throw DimensionError("project: no rows");
    return project(rows, d, BasisMeta(rows.size()));
}

/// Inverse of project on the truncated space.
[[nodiscard]] inline std::vector<std::vector<double>> reconstruct(const CoefficientBlock& block) {
    const Matrix& m = block.data();
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()),
                                          std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index k = 0; k < m.rows(); ++k) {
        for (Eigen::Index i = 0; i < m.cols(); ++i) {
            rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = m(k, i);
        }
    }
    return rows;
}

/// Row k of the result is A_k f_k.
[[nodiscard]] inline CoefficientBlock op_apply(const SpectralMatrixOperator& a,
                                               const CoefficientBlock& f) {
    require_same_basis(a.basis(), f.basis(), "op_apply");
    if (a.cols() != f.d()) {
        throw DimensionError("op_apply: operator has " + std::to_string(a.cols()) +
                             " columns, block has d=" + std::to_string(f.d()));
    }
    Matrix out(static_cast<Eigen::Index>(f.k_max()), static_cast<Eigen::Index>(a.rows()));
    for (std::size_t k = 0; k < f.k_max(); ++k) {
        out.row(static_cast<Eigen::Index>(k)) =
            (a[k] * f.data().row(static_cast<Eigen::Index>(k)).transpose()).transpose();
    }
    return {std::move(out), f.basis()};
}

/// sum_k g_k^T A_k f_k, accumulated in k order.
[[nodiscard]] inline double bilinear_form(const SpectralMatrixOperator& a, const CoefficientBlock& f,
                                          const CoefficientBlock& g) {
    require_same_basis(a.basis(), f.basis(), "bilinear_form");
    require_same_basis(a.basis(), g.basis(), "bilinear_form");
    if (a.cols() != f.d() || a.rows() != g.d()) {
        throw DimensionError("bilinear_form: operator " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " vs blocks d=" + std::to_string(f.d()) +
                             ", " + std::to_string(g.d()));
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < f.k_max(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        acc += g.data().row(kk).dot((a[k] * f.data().row(kk).transpose()).transpose());
    }
    return acc;
}

[[nodiscard]] inline SpectralMatrixOperator op_inverse(const SpectralMatrixOperator& a) {
    std::vector<Matrix> out;
    out.reserve(a.k_max());
    for (std::size_t k = 0; k < a.k_max(); ++k) {
        if (!is_symmetric(a[k])) {
            throw DomainError("op_inverse: matrix at k=" + std::to_string(k + 1) + " is not symmetric");
        }
        out.push_back(spd_inverse(a[k], "op_inverse at k=" + std::to_string(k + 1)));
    }
    return {std::move(out), a.basis(), {true, true}};
}

[[nodiscard]] inline SpectralMatrixOperator op_sqrt(const SpectralMatrixOperator& a) {
    std::vector<Matrix> out;
    out.reserve(a.k_max());
    for (std::size_t k = 0; k < a.k_max(); ++k) {
        if (!is_symmetric(a[k])) {
            throw DomainError("op_sqrt: matrix at k=" + std::to_string(k + 1) + " is not symmetric");
        }
        out.push_back(spd_sqrt(a[k], "op_sqrt at k=" + std::to_string(k + 1)));
    }
    return {std::move(out), a.basis(), {true, true}};
}

/// Per-k product A_k B_k.
[[nodiscard]] inline SpectralMatrixOperator op_compose(const SpectralMatrixOperator& a,
                                                       const SpectralMatrixOperator& b) {
    require_same_basis(a.basis(), b.basis(), "op_compose");
    if (a.cols() != b.rows()) {
        throw DimensionError("op_compose: " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " times " + std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()));
    }
    std::vector<Matrix> out;
    out.reserve(a.k_max());
    for (std::size_t k = 0; k < a.k_max(); ++k) out.push_back(a[k] * b[k]);
    return {std::move(out), a.basis()};
}

/// Partial sums of trace(A_k) with tail diagnostic; never throws on divergence.
[[nodiscard]] inline SeriesReport trace_series(const SpectralMatrixOperator& a,
                                               double tail_tolerance = kDefaultTailTolerance) {
    if (a.rows() != a.cols()) throw DimensionError("trace_series: operator is not square");
    std::vector<double> terms;
    terms.reserve(a.k_max());
    for (const Matrix& m : a.mats()) terms.push_back(m.trace());
    return summarize_series(terms, tail_tolerance);
}

/// sum_k trace(A_k). Throws ConvergenceError when the tail ratio exceeds the tolerance.
[[nodiscard]] inline double op_trace(const SpectralMatrixOperator& a,
                                     double tail_tolerance = kDefaultTailTolerance) {
    const SeriesReport r = trace_series(a, tail_tolerance);
    if (!r.converged) {
        throw ConvergenceError("op_trace: tail ratio " + std::to_string(r.tail_ratio) +
                               " exceeds tolerance " + std::to_string(tail_tolerance) +
                               " at K_max=" + std::to_string(a.k_max()));
    }
    return r.total;
}

}  // namespace hfanova
