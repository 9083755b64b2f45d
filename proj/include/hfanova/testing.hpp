#pragma once

// Linear hypothesis H0: K beta = C with per-l contrasts K_l (m x p).
// The global statistic is S = sum_l |K_l beta_hat_l - C_l|^2, whose null law
// is a central weighted chi-square sum.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hfanova/distributions.hpp"
#include "hfanova/errors.hpp"
#include "hfanova/estimation.hpp"
#include "hfanova/linalg.hpp"
#include "hfanova/model.hpp"
#include "hfanova/spectral_core.hpp"

namespace hfanova {

struct TestSpec {
    SpectralMatrixOperator K;  // m x p per l
    CoefficientBlock C;        // K_max x m
    double alpha = 0.05;

    [[nodiscard]] std::size_t m() const { return K.rows(); }

    void validate(std::size_t p) const {
        if (K.cols() != p) {
            throw DimensionError("TestSpec: K has " + std::to_string(K.cols()) + " columns, expected p=" +
                                 std::to_string(p));
        }
        if (K.rows() < 1) throw DimensionError("TestSpec: K must have at least one row");
        require_same_basis(K.basis(), C.basis(), "TestSpec");
        if (C.d() != m()) {
            throw DimensionError("TestSpec: C has d=" + std::to_string(C.d()) + ", expected m=" +
                                 std::to_string(m()));
        }
        if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("TestSpec: alpha must lie in (0, 1)");
    }
};

struct TestResult {
    double statistic = 0.0;
    double critical_value = 0.0;
    double p_value = std::numeric_limits<double>::quiet_NaN();
    bool reject = false;
    std::vector<double> per_l;      // per-l chi-square statistics (empty if some K_l is rank deficient)
    double condition_norm = 0.0;    // sup_l |Q_l^{1/2} K_l^T K_l Q_l^{1/2}|_2
    bool condition_passed = false;  // condition_norm < 1
    double dropped_weight_mass = 0.0;
    std::vector<std::string> warnings;
};

/// S = sum_l |K_l beta_hat_l - C_l|^2.
[[nodiscard]] inline double global_stat(const SpectralMatrixOperator& k_op, const CoefficientBlock& beta_hat,
                                        const CoefficientBlock& c) {
    require_same_basis(k_op.basis(), beta_hat.basis(), "global_stat");
    require_same_basis(k_op.basis(), c.basis(), "global_stat");
    if (k_op.cols() != beta_hat.d() || k_op.rows() != c.d()) {
        throw DimensionError("global_stat: K is " + std::to_string(k_op.rows()) + "x" +
                             std::to_string(k_op.cols()) + ", beta_hat d=" + std::to_string(beta_hat.d()) +
                             ", C d=" + std::to_string(c.d()));
    }
    double s = 0.0;
    for (std::size_t l = 0; l < k_op.k_max(); ++l) s += (k_op[l] * beta_hat.row(l) - c.row(l)).squaredNorm();
    return s;
}

/// Per-l covariance of beta_hat_l: sigma^2 (X^T Lambda_l^{-1} X)^{-1}.
[[nodiscard]] inline SpectralMatrixOperator coefficient_covariance(const ModelSpec& model) {
    const SpectralMatrixOperator q = estimator_covariance(model.X, model.lambda);
    std::vector<Matrix> out;
    out.reserve(q.k_max());
    const double s2 = model.sigma * model.sigma;
    for (const Matrix& m : q.mats()) out.push_back(s2 * m);
    return {std::move(out), q.basis(), {true, false}};
}

struct NullDistribution {
    QuadFormSpec spec;
    double condition_norm = 0.0;
    std::vector<std::size_t> condition_violations;  // 1-based l with norm >= 1
};

/// Null law of S: weights are the eigenvalues of Q_l^{1/2} K_l^T K_l Q_l^{1/2}
/// over l, all noncentralities zero.
[[nodiscard]] inline NullDistribution null_distribution(const SpectralMatrixOperator& k_op, const ModelSpec& model) {
    if (!(model.sigma > 0.0)) throw DomainError("null_distribution requires sigma > 0");
    require_same_basis(k_op.basis(), model.basis(), "null_distribution");
    if (k_op.cols() != model.p()) throw DimensionError("null_distribution: K must have p columns");
    const SpectralMatrixOperator q = coefficient_covariance(model);
    NullDistribution out;
    std::vector<QuadFormTerm> terms;
    for (std::size_t l = 0; l < q.k_max(); ++l) {
        const Matrix qh = psd_sqrt(q[l]);
        Matrix b = qh * k_op[l].transpose() * k_op[l] * qh;
        b = 0.5 * (b + b.transpose());
        const SymmetricEigen eig = symmetric_eigen(b);
        const double top = eig.values(0);
        out.condition_norm = std::max(out.condition_norm, top);
        if (!(top < 1.0)) out.condition_violations.push_back(l + 1);
        for (Eigen::Index i = 0; i < eig.values.size(); ++i) terms.push_back({std::max(eig.values(i), 0.0), 0.0});
    }
    out.spec = make_quadform_spec(terms, "test", model.k_max());
    return out;
}

[[nodiscard]] inline NullDistribution null_distribution(const TestSpec& spec, const ModelSpec& model) {
    spec.validate(model.p());
    return null_distribution(spec.K, model);
}

/// (K_l b_l - C_l)^T [K_l Q_l K_l^T]^{-1} (K_l b_l - C_l) with Q_l = sigma^2 (X^T Lambda_l^{-1} X)^{-1}.
[[nodiscard]] inline double perk_chisq(const Matrix& k_l, const Vector& beta_hat_l, const Vector& c_l,
                                       const Matrix& x, const Matrix& lambda_l, double sigma = 1.0) {
    if (k_l.cols() != x.cols() || beta_hat_l.size() != x.cols() || c_l.size() != k_l.rows()) {
        throw DimensionError("perk_chisq: dimension mismatch");
    }
    if (!(sigma > 0.0)) throw DomainError("perk_chisq requires sigma > 0");
    const Matrix nm = detail::normal_matrix(x, lambda_l, 0);
    const Matrix q = sigma * sigma * Eigen::LLT<Matrix>(nm).solve(Matrix::Identity(nm.rows(), nm.cols()));
    Matrix v = k_l * q * k_l.transpose();
    v = 0.5 * (v + v.transpose());
    const SymmetricEigen eig = symmetric_eigen(v);
    if (!(eig.values(eig.values.size() - 1) > kSingularRcond * eig.values(0))) {
        throw RankError("perk_chisq: K_l does not have full row rank");
    }
    const Vector r = k_l * beta_hat_l - c_l;
    return r.dot(Eigen::LLT<Matrix>(v).solve(r));
}

/// Test prepared once for a model and hypothesis: null law, critical value
/// and per-l GLS operators are cached so evaluate() is cheap.
class LinearHypothesisTest {
public:
    LinearHypothesisTest(const ModelSpec& model, TestSpec spec, const InversionOptions& opt = {})
        : model_(model), spec_(std::move(spec)), opt_(opt) {
        spec_.validate(model_.p());
        require_same_basis(spec_.K.basis(), model_.basis(), "LinearHypothesisTest");
        null_ = null_distribution(spec_.K, model_);
        critical_ = quantile(null_.spec, 1.0 - spec_.alpha, 1e-7, opt_);
        if (!null_.condition_violations.empty()) {
            warnings_.push_back("operator norm condition on K violated at " +
                                std::to_string(null_.condition_violations.size()) + " index(es); sup norm " +
                                std::to_string(null_.condition_norm));
        }
        const double s2 = model_.sigma * model_.sigma;
        per_l_ok_ = true;
        for (std::size_t l = 0; l < model_.k_max(); ++l) {
            const Matrix nm = detail::normal_matrix(model_.X, model_.lambda[l], l);
            const Eigen::LLT<Matrix> nchol(nm);
            const Matrix lam_inv = spd_inverse(model_.lambda[l], "Lambda_" + std::to_string(l + 1));
            gls_.push_back(nchol.solve(model_.X.transpose() * lam_inv));
            Matrix v = s2 * spec_.K[l] * nchol.solve(spec_.K[l].transpose());
            v = 0.5 * (v + v.transpose());
            const SymmetricEigen eig = symmetric_eigen(v);
            if (!(eig.values(eig.values.size() - 1) > kSingularRcond * eig.values(0))) per_l_ok_ = false;
            per_l_.emplace_back(v);
        }
        if (!per_l_ok_) warnings_.push_back("K_l is rank deficient for some l; per-l statistics omitted");
    }

    [[nodiscard]] const QuadFormSpec& null_spec() const noexcept { return null_.spec; }
    [[nodiscard]] double critical_value() const noexcept { return critical_; }
    [[nodiscard]] const TestSpec& spec() const noexcept { return spec_; }

    /// beta_hat_l = (X^T Lambda_l^{-1} X)^{-1} X^T Lambda_l^{-1} Y_l.
    [[nodiscard]] CoefficientBlock estimate(const CoefficientBlock& y) const {
        require_same_basis(model_.basis(), y.basis(), "LinearHypothesisTest");
        if (y.d() != model_.n()) throw DimensionError("LinearHypothesisTest: Y must have d=n");
        Matrix b(static_cast<Eigen::Index>(model_.k_max()), static_cast<Eigen::Index>(model_.p()));
        for (std::size_t l = 0; l < model_.k_max(); ++l) {
            b.row(static_cast<Eigen::Index>(l)) = (gls_[l] * y.row(l)).transpose();
        }
        return {std::move(b), model_.basis()};
    }

    [[nodiscard]] TestResult evaluate(const CoefficientBlock& y, bool with_p_value = true) const {
        const CoefficientBlock beta_hat = estimate(y);
        TestResult r;
        r.statistic = global_stat(spec_.K, beta_hat, spec_.C);
        r.critical_value = critical_;
        r.reject = r.statistic > critical_;
        if (with_p_value) r.p_value = std::clamp(1.0 - cdf(null_.spec, r.statistic, opt_), 0.0, 1.0);
        if (per_l_ok_) {
            r.per_l.reserve(model_.k_max());
            for (std::size_t l = 0; l < model_.k_max(); ++l) {
                const Vector d = spec_.K[l] * beta_hat.row(l) - spec_.C.row(l);
                r.per_l.push_back(d.dot(per_l_[l].solve(d)));
            }
        }
        r.condition_norm = null_.condition_norm;
        r.condition_passed = null_.condition_violations.empty();
        r.dropped_weight_mass = null_.spec.dropped_weight_mass;
        r.warnings = warnings_;
        return r;
    }

private:
    ModelSpec model_;
    TestSpec spec_;
    InversionOptions opt_;
    NullDistribution null_;
    double critical_ = 0.0;
    std::vector<Matrix> gls_;
    std::vector<Eigen::LLT<Matrix>> per_l_;
    bool per_l_ok_ = true;
    std::vector<std::string> warnings_;
};

[[nodiscard]] inline TestResult run_test(const ModelSpec& model, const CoefficientBlock& y, const TestSpec& spec,
                                         const InversionOptions& opt = {}) {
    return LinearHypothesisTest(model, spec, opt).evaluate(y, true);
}

}  // namespace hfanova
