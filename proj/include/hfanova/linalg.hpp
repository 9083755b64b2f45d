#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "hfanova/errors.hpp"

namespace hfanova {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Reciprocal condition numbers below this value are treated as singular.
inline constexpr double kSingularRcond = 1e-12;

/// Symmetric eigendecomposition with deterministic ordering: eigenvalues are
/// descending and each eigenvector has its largest-magnitude entry positive.
struct SymmetricEigen {
    Vector values;
    Matrix vectors;  // columns
};

[[nodiscard]] inline double symmetry_defect(const Matrix& a) {
    if (a.rows() != a.cols()) {
        return std::numeric_limits<double>::infinity();
    }
    const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
    return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

[[nodiscard]] inline bool is_symmetric(const Matrix& a, double rel_tol = 1e-12) {
    if (a.rows() != a.cols()) return false;
    if (a.size() == 0) return true;
    return symmetry_defect(a) <= rel_tol;
}

[[nodiscard]] inline SymmetricEigen symmetric_eigen(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw DimensionError("symmetric_eigen: matrix is " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()));
    }
    const Matrix sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw NumericError("symmetric_eigen: eigensolver failed");
    }
    const Eigen::Index n = a.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const Vector& ev = solver.eigenvalues();
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return ev(i) > ev(j); });

    SymmetricEigen out{Vector(n), Matrix(n, n)};
    for (Eigen::Index c = 0; c < n; ++c) {
        const Eigen::Index src = order[static_cast<std::size_t>(c)];
        out.values(c) = ev(src);
        Vector v = solver.eigenvectors().col(src);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        out.vectors.col(c) = v;
    }
    return out;
}

/// Throws DomainError for non-PD input and SingularityError when the
/// eigenvalue ratio falls below kSingularRcond.
inline void require_spd(const SymmetricEigen& eig, const std::string& what) {
    if (eig.values.size() == 0) return;
    const double hi = eig.values(0);
    const double lo = eig.values(eig.values.size() - 1);
    if (!(lo > 0.0)) {
        throw DomainError(what + ": matrix is not positive definite (min eigenvalue " +
                          std::to_string(lo) + ")");
    }
    if (lo / hi < kSingularRcond) {
        throw SingularityError(what + ": reciprocal condition number " + std::to_string(lo / hi) +
                               " below threshold");
    }
}

[[nodiscard]] inline Matrix spd_inverse(const Matrix& a, const std::string& what) {
    const SymmetricEigen eig = symmetric_eigen(a);
    require_spd(eig, what);
    Eigen::LLT<Matrix> llt(0.5 * (a + a.transpose()));
    Matrix inv = llt.solve(Matrix::Identity(a.rows(), a.cols()));
    return 0.5 * (inv + inv.transpose());
}

[[nodiscard]] inline Matrix spd_sqrt(const Matrix& a, const std::string& what) {
    const SymmetricEigen eig = symmetric_eigen(a);
    require_spd(eig, what);
    Matrix r = eig.vectors * eig.values.cwiseSqrt().asDiagonal() * eig.vectors.transpose();
    return 0.5 * (r + r.transpose());
}

[[nodiscard]] inline Matrix spd_inverse_sqrt(const Matrix& a, const std::string& what) {
    const SymmetricEigen eig = symmetric_eigen(a);
    require_spd(eig, what);
    Matrix r = eig.vectors * eig.values.cwiseSqrt().cwiseInverse().asDiagonal() *
               eig.vectors.transpose();
    return 0.5 * (r + r.transpose());
}

/// Symmetric square root of a positive semidefinite matrix; tiny negative
/// eigenvalues from rounding are clipped to zero.
[[nodiscard]] inline Matrix psd_sqrt(const Matrix& a) {
    const SymmetricEigen eig = symmetric_eigen(a);
    const double scale = eig.values.size() ? std::abs(eig.values(0)) : 0.0;
    Vector root(eig.values.size());
    for (Eigen::Index i = 0; i < root.size(); ++i) {
        const double v = eig.values(i);
        if (v < -1e-10 * std::max(scale, 1e-300)) {
            throw DomainError("psd_sqrt: matrix has negative eigenvalue " + std::to_string(v));
        }
        root(i) = std::sqrt(std::max(v, 0.0));
    }
    Matrix r = eig.vectors * root.asDiagonal() * eig.vectors.transpose();
    return 0.5 * (r + r.transpose());
}

[[nodiscard]] inline Eigen::Index numerical_rank(const Vector& descending_abs, double rel_tol) {
    if (descending_abs.size() == 0) return 0;
    const double top = descending_abs.cwiseAbs().maxCoeff();
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < descending_abs.size(); ++i) {
        if (std::abs(descending_abs(i)) > rel_tol * top) ++r;
    }
    return r;
}

}  // namespace hfanova
