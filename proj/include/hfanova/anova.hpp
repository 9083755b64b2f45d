#pragma once

// Variance components of the W-transformed model and their expectations.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hfanova/errors.hpp"
#include "hfanova/estimation.hpp"
#include "hfanova/linalg.hpp"
#include "hfanova/model.hpp"
#include "hfanova/series.hpp"
#include "hfanova/spectral_core.hpp"
#include "hfanova/weights.hpp"

namespace hfanova {

enum class Component { sst, ssr, sse };

[[nodiscard]] inline std::string to_string(Component c) {
    switch (c) {
        case Component::sst: return "sst";
        case Component::ssr: return "ssr";
        case Component::sse: return "sse";
    }
    return "unknown";
}

[[nodiscard]] inline Component component_from_string(const std::string& s) {
    if (s == "sst") return Component::sst;
    if (s == "ssr") return Component::ssr;
    if (s == "sse") return Component::sse;
    throw ValidationError("unknown component '" + s + "' (expected sst, ssr or sse)");
}

/// M_k = I - X (X^T Lambda_k^{-1} X)^{-1} X^T Lambda_k^{-1}.
[[nodiscard]] inline Matrix residual_projector(const Matrix& x, const Matrix& lambda_k) {
    if (lambda_k.rows() != x.rows() || lambda_k.cols() != x.rows()) {
        throw DimensionError("residual_projector: Lambda_k must be n x n");
    }
    const Matrix lam_inv = spd_inverse(lambda_k, "residual_projector");
    const Matrix nm = detail::normal_matrix(x, lambda_k, 0);
    const Matrix hat = x * Eigen::LLT<Matrix>(nm).solve(x.transpose() * lam_inv);
    return Matrix::Identity(x.rows(), x.rows()) - hat;
}

/// Kernel A^k of the quadratic form Y_k^T A^k Y_k for one component:
///   sst: W^T Lambda^{-1} W
///   ssr: W^T Lambda^{-1} X (X^T Lambda^{-1} X)^{-1} X^T Lambda^{-1} W
///   sse: sst kernel minus ssr kernel
[[nodiscard]] inline Matrix component_kernel(const Matrix& x, const Matrix& lambda_k, const Matrix& w_k,
                                             Component which) {
    const Matrix lam_inv = spd_inverse(lambda_k, "component_kernel");
    const Matrix sst = w_k.transpose() * lam_inv * w_k;
    Matrix out;
    if (which == Component::sst) {
        out = sst;
    } else {
        const Matrix nm = detail::normal_matrix(x, lambda_k, 0);
        const Matrix g = x.transpose() * lam_inv * w_k;  // p x n
        const Matrix ssr = g.transpose() * Eigen::LLT<Matrix>(nm).solve(g);
        out = which == Component::ssr ? ssr : Matrix(sst - ssr);
    }
    return 0.5 * (out + out.transpose());
}

struct VarianceComponents {
    double sst = 0.0;
    double sse = 0.0;
    double ssr = 0.0;
    std::vector<double> sst_k, sse_k, ssr_k;
    double sst_last_term = 0.0;  // tail diagnostics: magnitude of the K_max-th term
    double sse_last_term = 0.0;
    double ssr_last_term = 0.0;
    std::size_t clamped = 0;  // per-k values in [-1e-12, 0) clamped to 0
    std::vector<std::string> warnings;
};

namespace detail {

inline double clamp_rounding(double v, double scale, std::size_t& clamped) {
    if (v < 0.0 && v >= -1e-12 * std::max(scale, 1.0)) {
        ++clamped;
        return 0.0;
    }
    return v;
}

inline void require_model_weights(const ModelSpec& model, const WeightOperator& w, const char* where) {
    require_same_basis(model.basis(), w.W.basis(), where);
    if (w.W.rows() != model.n() || w.W.cols() != model.n()) {
        throw DimensionError(std::string(where) + ": W must be n x n");
    }
}

}  // namespace detail

/// sst_k = (W_k Y_k)^T Lambda_k^{-1} W_k Y_k, sse_k = (M_k W_k Y_k)^T Lambda_k^{-1} M_k W_k Y_k,
/// ssr_k = sst_k - sse_k. With `verify_ssr_kernel` the explicit SSR kernel is
/// evaluated as well and must agree to 1e-10.
[[nodiscard]] inline VarianceComponents sum_squares(const ModelSpec& model, const WeightOperator& w,
                                                    const CoefficientBlock& y, bool verify_ssr_kernel = false) {
    detail::require_model_weights(model, w, "sum_squares");
    require_same_basis(model.basis(), y.basis(), "sum_squares");
    if (y.d() != model.n()) throw DimensionError("sum_squares: Y must have d=n");

    VarianceComponents out;
    if (!w.conditions.passed()) {
        out.warnings.push_back("weight operator does not pass the finiteness checks");
    }
    for (std::size_t k = 0; k < model.k_max(); ++k) {
        const Matrix& lam = model.lambda[k];
        const Eigen::LLT<Matrix> chol(lam);
        const Vector wy = w.W[k] * y.row(k);
        const Vector resid = residual_projector(model.X, lam) * wy;
        const double sst = wy.dot(chol.solve(wy));
        const double sse = resid.dot(chol.solve(resid));
        double ssr = sst - sse;
        if (verify_ssr_kernel) {
            const Matrix kernel = component_kernel(model.X, lam, w.W[k], Component::ssr);
            const double direct = y.row(k).dot(kernel * y.row(k));
            if (std::abs(direct - ssr) > 1e-10 * std::max({std::abs(sst), std::abs(direct), 1e-300})) {
                throw NumericError("sum_squares: SSR kernel cross-check failed at k=" + std::to_string(k + 1));
            }
        }
        out.sst_k.push_back(detail::clamp_rounding(sst, sst, out.clamped));
        out.sse_k.push_back(detail::clamp_rounding(sse, sst, out.clamped));
        ssr = detail::clamp_rounding(ssr, sst, out.clamped);
        out.ssr_k.push_back(ssr);
        out.sst += out.sst_k.back();
        out.sse += out.sse_k.back();
        out.ssr += out.ssr_k.back();
    }
    out.sst_last_term = std::abs(out.sst_k.back());
    out.sse_last_term = std::abs(out.sse_k.back());
    out.ssr_last_term = std::abs(out.ssr_k.back());
    return out;
}

/// Precomputed per-k kernels for repeated evaluation of the components on
/// many datasets of one model (Monte Carlo loops). Agrees with sum_squares.
class ComponentEvaluator {
public:
    ComponentEvaluator(const ModelSpec& model, const WeightOperator& w) : basis_(model.basis()), n_(model.n()) {
        detail::require_model_weights(model, w, "ComponentEvaluator");
        for (std::size_t k = 0; k < model.k_max(); ++k) {
            sst_.push_back(component_kernel(model.X, model.lambda[k], w.W[k], Component::sst));
            sse_.push_back(component_kernel(model.X, model.lambda[k], w.W[k], Component::sse));
        }
    }

    [[nodiscard]] VarianceComponents operator()(const CoefficientBlock& y) const {
        require_same_basis(basis_, y.basis(), "ComponentEvaluator");
        if (y.d() != n_) throw DimensionError("ComponentEvaluator: Y must have d=n");
        VarianceComponents out;
        for (std::size_t k = 0; k < sst_.size(); ++k) {
            const Vector yk = y.row(k);
            const double sst = yk.dot(sst_[k] * yk);
            const double sse = yk.dot(sse_[k] * yk);
            out.sst_k.push_back(detail::clamp_rounding(sst, sst, out.clamped));
            out.sse_k.push_back(detail::clamp_rounding(sse, sst, out.clamped));
            out.ssr_k.push_back(detail::clamp_rounding(sst - sse, sst, out.clamped));
            out.sst += out.sst_k.back();
            out.sse += out.sse_k.back();
            out.ssr += out.ssr_k.back();
        }
        out.sst_last_term = std::abs(out.sst_k.back());
        out.sse_last_term = std::abs(out.sse_k.back());
        out.ssr_last_term = std::abs(out.ssr_k.back());
        return out;
    }

private:
    BasisMeta basis_;
    std::size_t n_;
    std::vector<Matrix> sst_, sse_;
};

struct ExpectedComponents {
    double e_sst = 0.0;
    double e_sse = 0.0;
    double e_ssr = 0.0;
    std::vector<double> e_sst_k, e_sse_k, e_ssr_k;
    SeriesReport sst_series, sse_series, ssr_series;
};

/// Exact expectations of the components with Y_k ~ N(X beta_k, sigma^2 Lambda_k):
/// per k, trace(A^k sigma^2 Lambda_k) + (X beta_k)^T A^k X beta_k.
[[nodiscard]] inline ExpectedComponents expected_components(const ModelSpec& model, const WeightOperator& w,
                                                            double tail_tolerance = kDefaultTailTolerance) {
    detail::require_model_weights(model, w, "expected_components");
    ExpectedComponents out;
    const double s2 = model.sigma * model.sigma;
    for (std::size_t k = 0; k < model.k_max(); ++k) {
        const Matrix& lam = model.lambda[k];
        const Vector mu = model.mean(k);
        const Matrix cov = s2 * lam;
        const double e_sst = expected_quadform(component_kernel(model.X, lam, w.W[k], Component::sst), mu, cov);
        const double e_sse = expected_quadform(component_kernel(model.X, lam, w.W[k], Component::sse), mu, cov);
        out.e_sst_k.push_back(e_sst);
        out.e_sse_k.push_back(e_sse);
        out.e_ssr_k.push_back(e_sst - e_sse);
    }
    out.sst_series = summarize_series(out.e_sst_k, tail_tolerance);
    out.sse_series = summarize_series(out.e_sse_k, tail_tolerance);
    out.ssr_series = summarize_series(out.e_ssr_k, tail_tolerance);
    out.e_sst = out.sst_series.total;
    out.e_sse = out.sse_series.total;
    out.e_ssr = out.e_sst - out.e_sse;
    return out;
}

/// Untransformed SST = sum_k Y_k^T Lambda_k^{-1} Y_k truncated at K_max. Its
/// mean diverges as K_max grows; reported only as a diagnostic series.
[[nodiscard]] inline SeriesReport untransformed_sst(const ModelSpec& model, const CoefficientBlock& y) {
    require_same_basis(model.basis(), y.basis(), "untransformed_sst");
    std::vector<double> terms;
    for (std::size_t k = 0; k < model.k_max(); ++k) {
        const Vector yk = y.row(k);
        terms.push_back(yk.dot(Eigen::LLT<Matrix>(model.lambda[k]).solve(yk)));
    }
    return summarize_series(terms);
}

}  // namespace hfanova
