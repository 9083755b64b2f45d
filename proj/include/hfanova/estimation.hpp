#pragma once

// Per-frequency generalized least squares in the RKHS norm of the error.
// For each k the problem min_b (Y_k - X b)^T Lambda_k^{-1} (Y_k - X b) is
// solved after whitening with the Cholesky factor of Lambda_k.

#include <string>
#include <vector>

#include <Eigen/QR>

#include "hfanova/errors.hpp"
#include "hfanova/linalg.hpp"
#include "hfanova/model.hpp"
#include "hfanova/series.hpp"
#include "hfanova/spectral_core.hpp"

namespace hfanova {

struct GlsFit {
    CoefficientBlock beta_hat;         // K_max x p
    SpectralMatrixOperator per_k_cov;  // (X^T Lambda_k^{-1} X)^{-1}
    SeriesReport estimability;         // partial sums of trace(per_k_cov)
    std::vector<std::string> warnings;
};

namespace detail {

/// Whitened design for one k: L^{-1} X where L L^T = Lambda_k.
struct WhitenedDesign {
    Eigen::LLT<Matrix> chol;
    Matrix design;
};

inline WhitenedDesign whiten(const Matrix& x, const Matrix& lambda_k, std::size_t k) {
    const std::string where = "Lambda_" + std::to_string(k + 1);
    const SymmetricEigen eig = symmetric_eigen(lambda_k);
    require_spd(eig, where);
    WhitenedDesign w{Eigen::LLT<Matrix>(lambda_k), Matrix()};
    if (w.chol.info() != Eigen::Success) throw DomainError(where + ": Cholesky factorization failed");
    w.design = w.chol.matrixL().solve(x);
    return w;
}

/// X^T Lambda_k^{-1} X, checked for rank.
inline Matrix normal_matrix(const Matrix& x, const Matrix& lambda_k, std::size_t k) {
    const WhitenedDesign w = whiten(x, lambda_k, k);
    Matrix nm = w.design.transpose() * w.design;
    nm = 0.5 * (nm + nm.transpose());
    const SymmetricEigen eig = symmetric_eigen(nm);
    if (!(eig.values(eig.values.size() - 1) > kSingularRcond * eig.values(0))) {
        throw RankError("X^T Lambda_k^{-1} X is singular at k=" + std::to_string(k + 1));
    }
    return nm;
}

}  // namespace detail

/// Q_k = (X^T Lambda_k^{-1} X)^{-1}: the covariance of the k-th coefficient
/// vector of the GLS estimator when Y_k has covariance Lambda_k.
[[nodiscard]] inline SpectralMatrixOperator estimator_covariance(const Matrix& x,
                                                                 const SpectralMatrixOperator& lambda) {
    if (lambda.rows() != static_cast<std::size_t>(x.rows()) || lambda.cols() != lambda.rows()) {
        throw DimensionError("estimator_covariance: Lambda/X dimension mismatch");
    }
    std::vector<Matrix> q;
    q.reserve(lambda.k_max());
    for (std::size_t k = 0; k < lambda.k_max(); ++k) {
        const Matrix nm = detail::normal_matrix(x, lambda[k], k);
        Matrix inv = Eigen::LLT<Matrix>(nm).solve(Matrix::Identity(nm.rows(), nm.cols()));
        q.push_back(0.5 * (inv + inv.transpose()));
    }
    return {std::move(q), lambda.basis(), {true, true}};
}

/// Partial sums S_K = sum_{k<=K} trace((X^T Lambda_k^{-1} X)^{-1}).
[[nodiscard]] inline SeriesReport check_estimability(const Matrix& x, const SpectralMatrixOperator& lambda,
                                                     double tail_tolerance = kDefaultTailTolerance) {
    const SpectralMatrixOperator q = estimator_covariance(x, lambda);
    return trace_series(q, tail_tolerance);
}

[[nodiscard]] inline GlsFit gls_fit(const ModelSpec& model, const CoefficientBlock& y,
                                    double tail_tolerance = kDefaultTailTolerance) {
    require_same_basis(model.basis(), y.basis(), "gls_fit");
    if (y.d() != model.n()) {
        throw DimensionError("gls_fit: Y has d=" + std::to_string(y.d()) + ", expected n=" +
                             std::to_string(model.n()));
    }
    const auto p = static_cast<Eigen::Index>(model.p());
    Matrix beta(static_cast<Eigen::Index>(model.k_max()), p);
    std::vector<Matrix> cov;
    cov.reserve(model.k_max());
    std::vector<double> traces;
    traces.reserve(model.k_max());
    for (std::size_t k = 0; k < model.k_max(); ++k) {
        const detail::WhitenedDesign w = detail::whiten(model.X, model.lambda[k], k);
        const Vector yt = w.chol.matrixL().solve(y.row(k));
        Eigen::HouseholderQR<Matrix> qr(w.design);
        const Matrix r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
        const Vector rdiag = r.diagonal().cwiseAbs();
        if (!(rdiag.minCoeff() > 1e-8 * rdiag.maxCoeff())) {
            throw RankError("gls_fit: X^T Lambda_k^{-1} X is singular at k=" + std::to_string(k + 1));
        }
        const Vector qty = (qr.householderQ().transpose() * yt).head(p);
        beta.row(static_cast<Eigen::Index>(k)) =
            r.triangularView<Eigen::Upper>().solve(qty).transpose();
        const Matrix rinv = r.triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
        Matrix c = rinv * rinv.transpose();
        c = 0.5 * (c + c.transpose());
        traces.push_back(c.trace());
        cov.push_back(std::move(c));
    }
    GlsFit fit{CoefficientBlock(std::move(beta), model.basis()),
               SpectralMatrixOperator(std::move(cov), model.basis(), {true, true}),
               summarize_series(traces, tail_tolerance),
               {}};
    if (!fit.estimability.converged) {
        fit.warnings.push_back("estimability series did not pass the tail-ratio check (ratio " +
                               std::to_string(fit.estimability.tail_ratio) + ")");
    }
    return fit;
}

/// E[y^T A y] = trace(A V) + mu^T A mu for y ~ N(mu, V).
[[nodiscard]] inline double expected_quadform(const Matrix& a, const Vector& mu, const Matrix& v) {
    if (a.rows() != a.cols() || v.rows() != a.rows() || v.cols() != a.cols() || mu.size() != a.rows()) {
        throw DimensionError("expected_quadform: dimension mismatch");
    }
    if (!is_symmetric(a)) throw ValidationError("expected_quadform: A is not symmetric");
    return (a * v).trace() + mu.dot(a * mu);
}

}  // namespace hfanova
