#pragma once

// Weight operator W with W_k = Psi_k Omega(W_k) Psi_k^T, Psi_k the
// eigenvectors of Lambda_k, and eigenvalue decay chosen so the transformed
// sums of squares have finite mean.

#include <cmath>
#include <string>
#include <vector>

#include "hfanova/errors.hpp"
#include "hfanova/linalg.hpp"
#include "hfanova/series.hpp"
#include "hfanova/spectral_core.hpp"

namespace hfanova {

/// Eigendecomposition of one SPD Lambda_k, eigenvalues descending.
struct LambdaEigen {
    Matrix psi;    // orthogonal, columns are eigenvectors
    Vector omega;  // descending, positive
};

[[nodiscard]] inline LambdaEigen eig_lambda(const Matrix& lambda_k) {
    if (lambda_k.rows() != lambda_k.cols()) throw DimensionError("eig_lambda: matrix is not square");
    if (!is_symmetric(lambda_k)) throw DomainError("eig_lambda: matrix is not symmetric");
    SymmetricEigen eig = symmetric_eigen(lambda_k);
    if (!(eig.values(eig.values.size() - 1) > 0.0)) {
        throw DomainError("eig_lambda: matrix is not positive definite");
    }
    return {std::move(eig.vectors), std::move(eig.values)};
}

enum class WeightMode {
    sst,      // omega_p(W_k) = k^{-(rho~(p) + varrho(p)) / 2}
    ssr,      // omega_p(W_k) = k^{-(rho~(p) + varrho(p))}
    uniform,  // omega_p(W_k) = M k^{-(rho + varrho) / 2}
    custom    // user-supplied matrices
};

[[nodiscard]] inline std::string to_string(WeightMode m) {
    switch (m) {
        case WeightMode::sst: return "sst";
        case WeightMode::ssr: return "ssr";
        case WeightMode::uniform: return "uniform";
        case WeightMode::custom: return "custom";
    }
    return "unknown";
}

[[nodiscard]] inline WeightMode weight_mode_from_string(const std::string& s) {
    if (s == "sst") return WeightMode::sst;
    if (s == "ssr") return WeightMode::ssr;
    if (s == "uniform") return WeightMode::uniform;
    throw ValidationError("unknown weight mode '" + s + "' (expected sst, ssr or uniform)");
}

/// Decay plan. Empty rho_tilde means "estimate from Lambda"; a single entry
/// is broadcast to every eigen-slot p. In uniform mode only the first entry
/// of rho_tilde / varrho is used (scalar rho, varrho).
struct WeightPlan {
    WeightMode mode = WeightMode::ssr;
    std::vector<double> rho_tilde;
    std::vector<double> varrho{1.5};
    double M = 1.0;

    void validate() const {
        if (mode == WeightMode::custom) return;
        if (varrho.empty()) throw ValidationError("WeightPlan: varrho must be given");
        for (double v : varrho) {
            if (!(v > 1.0)) throw ValidationError("WeightPlan: every varrho must exceed 1");
        }
        if (mode == WeightMode::uniform) {
            if (!(M > 0.0)) throw ValidationError("WeightPlan: M must be positive");
            if (!rho_tilde.empty() && !(rho_tilde.front() > 1.0)) {
                throw ValidationError("WeightPlan: uniform mode requires rho > 1");
            }
        }
        for (double r : rho_tilde) {
            if (!std::isfinite(r)) throw ValidationError("WeightPlan: rho_tilde must be finite");
        }
    }
};

/// Convergence verdicts for sum_k trace(W_k^T Lambda_k^{-1} W_k) (S_a) and
/// sum_k trace(Lambda_k^{-1} W_k) (S_b).
struct WeightConditionReport {
    SeriesReport s_a;
    SeriesReport s_b;

    [[nodiscard]] bool passed() const { return s_a.converged && s_b.converged; }
};

struct WeightOperator {
    SpectralMatrixOperator W;
    WeightPlan plan;  // rho_tilde / varrho resolved to one value per slot
    WeightConditionReport conditions;
};

namespace detail {

/// Slope of log y on log k over the upper half of 1..K (least squares).
inline double loglog_decay(const std::vector<double>& y) {
    const std::size_t k_max = y.size();
    if (k_max < 2) return 0.0;
    const std::size_t start = std::max<std::size_t>(1, (k_max + 1) / 2);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    double cnt = 0;
    for (std::size_t k = start; k <= k_max; ++k) {
        const double lx = std::log(static_cast<double>(k));
        const double ly = std::log(y[k - 1]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        cnt += 1;
    }
    const double denom = cnt * sxx - sx * sx;
    if (cnt < 2 || denom <= 0.0) return 0.0;
    return -(cnt * sxy - sx * sy) / denom;
}

/// Rounds an estimated decay exponent upward on a 1e-3 grid after removing
/// 1e-6-level regression noise, so that omega_p(Lambda_k) >= C k^{-rho~}.
inline double round_up_exponent(double s) {
    const double snapped = std::round(s * 1e6) / 1e6;
    return std::ceil(snapped * 1e3 - 1e-9) / 1e3;
}

}  // namespace detail

/// rho~(p) per eigen-slot p from log-log regression of omega_p(Lambda_k) on k
/// over the upper half of 1..K_max, rounded up.
[[nodiscard]] inline std::vector<double> estimate_decay_exponents(const SpectralMatrixOperator& lambda) {
    const std::size_t n = lambda.rows();
    std::vector<std::vector<double>> slots(n, std::vector<double>(lambda.k_max()));
    for (std::size_t k = 0; k < lambda.k_max(); ++k) {
        const LambdaEigen e = eig_lambda(lambda[k]);
        for (std::size_t p = 0; p < n; ++p) slots[p][k] = e.omega(static_cast<Eigen::Index>(p));
    }
    std::vector<double> out(n);
    for (std::size_t p = 0; p < n; ++p) out[p] = detail::round_up_exponent(detail::loglog_decay(slots[p]));
    return out;
}

/// rho for uniform mode: decay of mu_k = min_p omega_p(Lambda_k).
[[nodiscard]] inline double estimate_uniform_exponent(const SpectralMatrixOperator& lambda) {
    std::vector<double> mins(lambda.k_max());
    for (std::size_t k = 0; k < lambda.k_max(); ++k) {
        const LambdaEigen e = eig_lambda(lambda[k]);
        mins[k] = e.omega(e.omega.size() - 1);
    }
    return detail::round_up_exponent(detail::loglog_decay(mins));
}

[[nodiscard]] inline WeightConditionReport check_weight_conditions(
    const SpectralMatrixOperator& w, const SpectralMatrixOperator& lambda,
    double tail_tolerance = kDefaultTailTolerance) {
    require_same_basis(w.basis(), lambda.basis(), "check_weight_conditions");
    if (w.rows() != lambda.rows() || w.cols() != lambda.cols()) {
        throw DimensionError("check_weight_conditions: W and Lambda shapes differ");
    }
    std::vector<double> a, b;
    a.reserve(w.k_max());
    b.reserve(w.k_max());
    for (std::size_t k = 0; k < w.k_max(); ++k) {
        const Matrix inv = spd_inverse(lambda[k], "Lambda_" + std::to_string(k + 1));
        a.push_back((w[k].transpose() * inv * w[k]).trace());
        b.push_back((inv * w[k]).trace());
    }
    return {summarize_series(a, tail_tolerance), summarize_series(b, tail_tolerance)};
}

[[nodiscard]] inline WeightConditionReport check_weight_conditions(
    const WeightOperator& w, const SpectralMatrixOperator& lambda,
    double tail_tolerance = kDefaultTailTolerance) {
    return check_weight_conditions(w.W, lambda, tail_tolerance);
}

[[nodiscard]] inline WeightOperator build_weights(const SpectralMatrixOperator& lambda, WeightPlan plan,
                                                  double tail_tolerance = kDefaultTailTolerance) {
    if (plan.mode == WeightMode::custom) {
        throw ValidationError("build_weights: custom mode requires explicit matrices (use make_weight_operator)");
    }
    plan.validate();
    const std::size_t n = lambda.rows();
    auto broadcast = [n](const std::vector<double>& v, const char* name) {
        if (v.size() == 1) return std::vector<double>(n, v.front());
        if (v.size() != n) {
            throw DimensionError(std::string("WeightPlan: ") + name + " needs 1 or " + std::to_string(n) +
                                 " entries");
        }
        return v;
    };

    if (plan.mode == WeightMode::uniform) {
        const double rho = plan.rho_tilde.empty() ? estimate_uniform_exponent(lambda) : plan.rho_tilde.front();
        if (!(rho > 1.0)) {
            throw ValidationError("build_weights: uniform mode requires rho > 1 (got " + std::to_string(rho) + ")");
        }
        plan.rho_tilde = std::vector<double>(n, rho);
        plan.varrho = std::vector<double>(n, plan.varrho.front());
    } else {
        plan.rho_tilde = plan.rho_tilde.empty() ? estimate_decay_exponents(lambda)
                                                : broadcast(plan.rho_tilde, "rho_tilde");
        plan.varrho = broadcast(plan.varrho, "varrho");
    }

    std::vector<Matrix> mats;
    mats.reserve(lambda.k_max());
    for (std::size_t k = 1; k <= lambda.k_max(); ++k) {
        const LambdaEigen e = eig_lambda(lambda[k - 1]);
        const double kd = static_cast<double>(k);
        Vector omega(static_cast<Eigen::Index>(n));
        for (std::size_t p = 0; p < n; ++p) {
            const double sum = plan.rho_tilde[p] + plan.varrho[p];
            double v = 0.0;
            switch (plan.mode) {
                case WeightMode::sst: v = std::pow(kd, -sum / 2.0); break;
                case WeightMode::ssr: v = std::pow(kd, -sum); break;
                case WeightMode::uniform: v = plan.M * std::pow(kd, -sum / 2.0); break;
                case WeightMode::custom: break;
            }
            omega(static_cast<Eigen::Index>(p)) = v;
        }
        Matrix wk = e.psi * omega.asDiagonal() * e.psi.transpose();
        wk = 0.5 * (wk + wk.transpose());
        mats.push_back(std::move(wk));
    }
    SpectralMatrixOperator w(std::move(mats), lambda.basis(), {true, false});
    WeightConditionReport report = check_weight_conditions(w, lambda, tail_tolerance);
    return {std::move(w), std::move(plan), std::move(report)};
}

/// Wraps explicit weight matrices (e.g. W = I) with their condition report.
[[nodiscard]] inline WeightOperator make_weight_operator(SpectralMatrixOperator w,
                                                         const SpectralMatrixOperator& lambda,
                                                         double tail_tolerance = kDefaultTailTolerance) {
    WeightConditionReport report = check_weight_conditions(w, lambda, tail_tolerance);
    WeightPlan plan;
    plan.mode = WeightMode::custom;
    plan.varrho.clear();
    return {std::move(w), std::move(plan), std::move(report)};
}

}  // namespace hfanova
