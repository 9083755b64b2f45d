#pragma once

// Model specification Y = X beta + sigma * eps with Hilbert-valued components
// and error covariance diagonal in the common eigenbasis. The covariance
// family is Lambda_k[i,j] = sqrt(lambda_ki * lambda_kj) * rho[i,j] with rho a
// strictly positive definite correlation matrix.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SVD>

#include "hfanova/errors.hpp"
#include "hfanova/linalg.hpp"
#include "hfanova/series.hpp"
#include "hfanova/spectral_core.hpp"

namespace hfanova {

/// Continuous function f_i from a small closed set, evaluated exactly.
struct FunctionDescriptor {
    enum class Kind { polynomial, power, affine_power };

    Kind kind = Kind::power;
    std::vector<double> coefficients;  // polynomial: c_0 + c_1 x + ...
    double coef = 1.0;                 // power: coef * x^exponent
    double exponent = 1.0;
    double offset = 0.0;               // affine_power: offset + coef * x^exponent

    static FunctionDescriptor polynomial(std::vector<double> c) {
        FunctionDescriptor f;
        f.kind = Kind::polynomial;
        f.coefficients = std::move(c);
        return f;
    }
    static FunctionDescriptor power(double coef, double exponent) {
        FunctionDescriptor f;
        f.kind = Kind::power;
        f.coef = coef;
        f.exponent = exponent;
        return f;
    }
    static FunctionDescriptor affine_power(double offset, double coef, double exponent) {
        FunctionDescriptor f;
        f.kind = Kind::affine_power;
        f.offset = offset;
        f.coef = coef;
        f.exponent = exponent;
        return f;
    }

    [[nodiscard]] double operator()(double x) const {
        switch (kind) {
            case Kind::polynomial: {
                double acc = 0.0;
                for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
                return acc;
            }
            case Kind::power:
                return coef * std::pow(x, exponent);
            case Kind::affine_power:
                return offset + coef * std::pow(x, exponent);
        }
        return 0.0;
    }
};

/// Eigenvalue law of the generating operator: lambda_k(L) = scale * k^exponent + shift.
struct OperatorLaw {
    double scale = 1.0;
    double exponent = 1.0;
    double shift = 0.0;

    [[nodiscard]] double operator()(std::size_t k) const {
        return scale * std::pow(static_cast<double>(k), exponent) + shift;
    }
};

/// lambda_ki = |f_i(lambda_k(L))|^{-2}, returned as a K_max x n matrix.
[[nodiscard]] inline Matrix pseudodiff_spectrum(const std::vector<FunctionDescriptor>& f_specs,
                                                const OperatorLaw& op_law, std::size_t k_max) {
    if (f_specs.empty()) throw DimensionError("pseudodiff_spectrum: no component functions");
    if (k_max < 1) throw ValidationError("pseudodiff_spectrum: K_max must be >= 1");
    Matrix out(static_cast<Eigen::Index>(k_max), static_cast<Eigen::Index>(f_specs.size()));
    for (std::size_t k = 1; k <= k_max; ++k) {
        const double x = op_law(k);
        for (std::size_t i = 0; i < f_specs.size(); ++i) {
            const double v = f_specs[i](x);
            if (v == 0.0 || !std::isfinite(v)) {
                throw DomainError("pseudodiff_spectrum: f_" + std::to_string(i + 1) +
                                  " vanishes or is not finite at lambda_" + std::to_string(k) +
                                  "(L)=" + std::to_string(x));
            }
            out(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(i)) = 1.0 / (v * v);
        }
    }
    return out;
}

/// lambda_ki = scale_i * k^{-exponent_i}.
[[nodiscard]] inline Matrix power_law_spectrum(const std::vector<double>& scales,
                                               const std::vector<double>& exponents,
                                               std::size_t k_max) {
    if (scales.empty() || scales.size() != exponents.size()) {
        throw DimensionError("power_law_spectrum: scales/exponents size mismatch");
    }
    Matrix out(static_cast<Eigen::Index>(k_max), static_cast<Eigen::Index>(scales.size()));
    for (std::size_t k = 1; k <= k_max; ++k) {
        for (std::size_t i = 0; i < scales.size(); ++i) {
            out(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(i)) =
                scales[i] * std::pow(static_cast<double>(k), -exponents[i]);
        }
    }
    return out;
}

struct SpectrumFamily {
    enum class Kind { power_law, pseudodiff, explicit_values };

    Kind kind = Kind::explicit_values;
    Matrix eigenvalues;  // K x n, lambda_ki
    Matrix correlation;  // n x n

    [[nodiscard]] std::size_t n() const { return static_cast<std::size_t>(eigenvalues.cols()); }
    [[nodiscard]] std::size_t k_max() const { return static_cast<std::size_t>(eigenvalues.rows()); }

    void validate() const {
        if (eigenvalues.rows() < 1 || eigenvalues.cols() < 1) {
            throw DimensionError("SpectrumFamily: empty eigenvalue table");
        }
        if (!eigenvalues.allFinite() || (eigenvalues.array() <= 0.0).any()) {
            throw ValidationError("SpectrumFamily: eigenvalues must be finite and strictly positive");
        }
        if (correlation.rows() != eigenvalues.cols() || correlation.cols() != eigenvalues.cols()) {
            throw DimensionError("SpectrumFamily: correlation must be " + std::to_string(n()) + "x" +
                                 std::to_string(n()));
        }
        if (!is_symmetric(correlation)) throw ValidationError("SpectrumFamily: correlation not symmetric");
        for (Eigen::Index i = 0; i < correlation.rows(); ++i) {
            if (std::abs(correlation(i, i) - 1.0) > 1e-12) {
                throw ValidationError("SpectrumFamily: correlation must have unit diagonal");
            }
        }
        const SymmetricEigen eig = symmetric_eigen(correlation);
        if (!(eig.values(eig.values.size() - 1) > kSingularRcond * eig.values(0))) {
            throw ValidationError("SpectrumFamily: correlation is not strictly positive definite");
        }
    }

    static SpectrumFamily power_law(const std::vector<double>& scales,
                                    const std::vector<double>& exponents, std::size_t k_max,
                                    Matrix rho = Matrix()) {
        SpectrumFamily f;
        f.kind = Kind::power_law;
        f.eigenvalues = power_law_spectrum(scales, exponents, k_max);
        f.correlation = rho.size() ? std::move(rho) : Matrix::Identity(f.eigenvalues.cols(), f.eigenvalues.cols());
        f.validate();
        return f;
    }

    static SpectrumFamily pseudodiff(const std::vector<FunctionDescriptor>& fs, const OperatorLaw& law,
                                     std::size_t k_max, Matrix rho = Matrix()) {
        SpectrumFamily f;
        f.kind = Kind::pseudodiff;
        f.eigenvalues = pseudodiff_spectrum(fs, law, k_max);
        f.correlation = rho.size() ? std::move(rho) : Matrix::Identity(f.eigenvalues.cols(), f.eigenvalues.cols());
        f.validate();
        return f;
    }

    static SpectrumFamily explicit_values(Matrix values, Matrix rho = Matrix()) {
        SpectrumFamily f;
        f.kind = Kind::explicit_values;
        f.eigenvalues = std::move(values);
        f.correlation = rho.size() ? std::move(rho) : Matrix::Identity(f.eigenvalues.cols(), f.eigenvalues.cols());
        f.validate();
        return f;
    }
};

/// Lambda_k[i,j] = sqrt(lambda_ki lambda_kj) rho[i,j] for k = 1..K_max.
[[nodiscard]] inline SpectralMatrixOperator build_lambda(const SpectrumFamily& family, std::size_t k_max) {
    family.validate();
    if (k_max < 1 || k_max > family.k_max()) {
        throw DimensionError("build_lambda: K_max=" + std::to_string(k_max) + " but family has " +
                             std::to_string(family.k_max()) + " rows");
    }
    const auto n = static_cast<Eigen::Index>(family.n());
    return SpectralMatrixOperator::generate(
        BasisMeta(k_max),
        [&](std::size_t k) {
            const Vector root = family.eigenvalues.row(static_cast<Eigen::Index>(k - 1)).transpose().cwiseSqrt();
            Matrix m(n, n);
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = 0; j < n; ++j) {
                    m(i, j) = i == j ? family.eigenvalues(static_cast<Eigen::Index>(k - 1), i)
                                     : root(i) * root(j) * family.correlation(i, j);
                }
            }
            return m;
        },
        {true, true});
}

/// Structural diagnostics of a covariance sequence against the common-eigenbasis assumption.
struct A0Diagnostics {
    std::vector<double> min_eigenvalue;
    std::vector<std::size_t> rank;
    SeriesReport trace;
    std::vector<std::size_t> rank_one_k;       // 1-based k with numerically rank-one Lambda_k (n >= 2)
    std::vector<std::size_t> asymmetric_k;     // 1-based
    std::vector<std::size_t> non_positive_k;   // 1-based, min eigenvalue <= 0

    [[nodiscard]] bool ok() const {
        return rank_one_k.empty() && asymmetric_k.empty() && non_positive_k.empty();
    }
};

[[nodiscard]] inline A0Diagnostics validate_a0(const SpectralMatrixOperator& lambda,
                                               double tail_tolerance = kDefaultTailTolerance) {
    if (lambda.rows() != lambda.cols()) throw DimensionError("validate_a0: operator is not square");
    A0Diagnostics d;
    const std::size_t n = lambda.rows();
    std::vector<double> traces;
    for (std::size_t k = 0; k < lambda.k_max(); ++k) {
        const Matrix& m = lambda[k];
        if (!is_symmetric(m)) d.asymmetric_k.push_back(k + 1);
        const SymmetricEigen eig = symmetric_eigen(m);
        const double lo = eig.values(eig.values.size() - 1);
        d.min_eigenvalue.push_back(lo);
        const auto r = static_cast<std::size_t>(numerical_rank(eig.values, 1e-10));
        d.rank.push_back(r);
        if (n >= 2 && r <= 1) d.rank_one_k.push_back(k + 1);
        if (!(lo > 0.0) && !(n >= 2 && r <= 1)) d.non_positive_k.push_back(k + 1);
        traces.push_back(m.trace());
    }
    d.trace = summarize_series(traces, tail_tolerance);
    return d;
}

/// X (n x p, full column rank), Lambda (n x n SPD per k), beta (K_max x p), sigma >= 0.
/// The sampling covariance of Y_k is sigma^2 Lambda_k.
struct ModelSpec {
    Matrix X;
    SpectralMatrixOperator lambda;
    CoefficientBlock beta;
    double sigma = 1.0;

    ModelSpec() = default;
    ModelSpec(Matrix x, SpectralMatrixOperator lam, CoefficientBlock b, double s = 1.0)
        : X(std::move(x)), lambda(std::move(lam)), beta(std::move(b)), sigma(s) {
        validate();
    }

    /// Model with beta = 0.
    ModelSpec(Matrix x, SpectralMatrixOperator lam, double s = 1.0)
        : X(std::move(x)), lambda(std::move(lam)), sigma(s) {
        beta = CoefficientBlock::zeros(lambda.basis(), static_cast<std::size_t>(X.cols()));
        validate();
    }

    [[nodiscard]] std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
    [[nodiscard]] std::size_t p() const { return static_cast<std::size_t>(X.cols()); }
    [[nodiscard]] const BasisMeta& basis() const { return lambda.basis(); }
    [[nodiscard]] std::size_t k_max() const { return lambda.k_max(); }

    /// Mean of Y_k, i.e. X beta_k (0-based k).
    [[nodiscard]] Vector mean(std::size_t k) const { return X * beta.row(k); }

    void validate() const {
        if (X.rows() < 1 || X.cols() < 1 || X.rows() < X.cols()) {
            throw DimensionError("ModelSpec: need n >= p >= 1, got n=" + std::to_string(X.rows()) +
                                 ", p=" + std::to_string(X.cols()));
        }
        if (!X.allFinite()) throw ValidationError("ModelSpec: X has non-finite entries");
        Eigen::JacobiSVD<Matrix> svd(X);
        const Vector& sv = svd.singularValues();
        if (!(sv(sv.size() - 1) > kSingularRcond * sv(0))) {
            throw RankError("ModelSpec: X does not have full column rank");
        }
        if (lambda.rows() != n() || lambda.cols() != n()) {
            throw DimensionError("ModelSpec: Lambda must be " + std::to_string(n()) + "x" +
                                 std::to_string(n()));
        }
        for (std::size_t k = 0; k < lambda.k_max(); ++k) {
            if (!is_symmetric(lambda[k])) {
                throw ValidationError("ModelSpec: Lambda_" + std::to_string(k + 1) + " is not symmetric");
            }
            const SymmetricEigen eig = symmetric_eigen(lambda[k]);
            require_spd(eig, "ModelSpec: Lambda_" + std::to_string(k + 1));
        }
        require_same_basis(lambda.basis(), beta.basis(), "ModelSpec");
        if (beta.d() != p()) {
            throw DimensionError("ModelSpec: beta has d=" + std::to_string(beta.d()) + ", expected p=" +
                                 std::to_string(p()));
        }
        if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
            throw ValidationError("ModelSpec: sigma must be finite and >= 0");
        }
    }
};

}  // namespace hfanova
