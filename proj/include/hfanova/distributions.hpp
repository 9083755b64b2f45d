#pragma once

// Exact laws of the variance components as weighted sums of independent
// noncentral chi-square(1) variables: sum_i xi_i * chi2_1(delta2_i).
//
// Two independent evaluation routes exist for the MGF/CF factors of one k:
// the canonical (xi, delta2) product, and direct determinant evaluation on
// the kernel matrices. They must agree.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/LU>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hfanova/anova.hpp"
#include "hfanova/errors.hpp"
#include "hfanova/linalg.hpp"
#include "hfanova/model.hpp"
#include "hfanova/weights.hpp"

namespace hfanova {

using Complex = std::complex<double>;

struct QuadFormTerm {
    double weight = 0.0;        // xi
    double noncentrality = 0.0; // delta^2
};

struct QuadFormSpec {
    std::vector<QuadFormTerm> terms;
    std::string provenance;
    std::size_t k_max = 0;
    /// The MGF is evaluated only for t < trace_bound = 1 / (2 sum |xi|).
    double trace_bound = std::numeric_limits<double>::infinity();
    /// sum |xi| (1 + delta^2) over terms removed by the truncation rule.
    double dropped_weight_mass = 0.0;
    std::size_t dropped_terms = 0;

    [[nodiscard]] double mean() const {
        double m = 0.0;
        for (const auto& t : terms) m += t.weight * (1.0 + t.noncentrality);
        return m;
    }
    [[nodiscard]] double variance() const {
        double v = 0.0;
        for (const auto& t : terms) v += 2.0 * t.weight * t.weight * (1.0 + 2.0 * t.noncentrality);
        return v;
    }
    [[nodiscard]] double max_weight() const {
        double m = -std::numeric_limits<double>::infinity();
        for (const auto& t : terms) m = std::max(m, t.weight);
        return m;
    }
    [[nodiscard]] double max_abs_weight() const {
        double m = 0.0;
        for (const auto& t : terms) m = std::max(m, std::abs(t.weight));
        return m;
    }
    [[nodiscard]] bool nonnegative() const {
        return std::all_of(terms.begin(), terms.end(), [](const QuadFormTerm& t) { return t.weight >= 0.0; });
    }
    [[nodiscard]] bool nonpositive() const {
        return std::all_of(terms.begin(), terms.end(), [](const QuadFormTerm& t) { return t.weight <= 0.0; });
    }
};

/// Applies the truncation rule (drop |xi| < 1e-14 max|xi| with delta^2 < 1e-14,
/// and every exactly-zero weight) and fills the MGF validity bound.
[[nodiscard]] inline QuadFormSpec make_quadform_spec(const std::vector<QuadFormTerm>& raw,
                                                     std::string provenance = {}, std::size_t k_max = 0) {
    QuadFormSpec spec;
    spec.provenance = std::move(provenance);
    spec.k_max = k_max;
    double max_abs = 0.0;
    for (const auto& t : raw) {
        if (!std::isfinite(t.weight) || !std::isfinite(t.noncentrality)) {
            throw ValidationError("QuadFormSpec: non-finite term");
        }
        if (t.noncentrality < 0.0) throw ValidationError("QuadFormSpec: negative noncentrality");
        max_abs = std::max(max_abs, std::abs(t.weight));
    }
    double abs_sum = 0.0;
    for (const auto& t : raw) {
        const bool negligible = std::abs(t.weight) < 1e-14 * max_abs && t.noncentrality < 1e-14;
        if (t.weight == 0.0 || negligible) {
            spec.dropped_weight_mass += std::abs(t.weight) * (1.0 + t.noncentrality);
            ++spec.dropped_terms;
            continue;
        }
        spec.terms.push_back(t);
        abs_sum += std::abs(t.weight);
    }
    spec.trace_bound = abs_sum > 0.0 ? 1.0 / (2.0 * abs_sum) : std::numeric_limits<double>::infinity();
    return spec;
}

/// Y^T A Y with Y ~ N(mu, V) equals sum_i xi_i chi2_1(delta2_i) in law, where
/// V^{1/2} A V^{1/2} = P diag(xi) P^T and delta = P^T V^{-1/2} mu.
[[nodiscard]] inline std::vector<QuadFormTerm> quadform_canonical(const Matrix& a, const Matrix& v,
                                                                  const Vector& mu) {
    if (a.rows() != a.cols() || v.rows() != a.rows() || v.cols() != a.cols() || mu.size() != a.rows()) {
        throw DimensionError("quadform_canonical: dimension mismatch");
    }
    if (!is_symmetric(a, 1e-10)) throw DomainError("quadform_canonical: A is not symmetric");
    const Matrix vh = spd_sqrt(v, "quadform_canonical covariance");
    const SymmetricEigen eig = symmetric_eigen(vh * a * vh);
    const Vector delta = eig.vectors.transpose() * Eigen::LLT<Matrix>(vh).solve(mu);
    std::vector<QuadFormTerm> out(static_cast<std::size_t>(a.rows()));
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = {eig.values(i), delta(i) * delta(i)};
    }
    return out;
}

/// Per-k kernels A^k of one component.
[[nodiscard]] inline SpectralMatrixOperator component_kernels(const ModelSpec& model, const WeightOperator& w,
                                                              Component which) {
    detail::require_model_weights(model, w, "component_kernels");
    std::vector<Matrix> mats;
    mats.reserve(model.k_max());
    for (std::size_t k = 0; k < model.k_max(); ++k) {
        mats.push_back(component_kernel(model.X, model.lambda[k], w.W[k], which));
    }
    return {std::move(mats), model.basis(), {true, false}};
}

/// Canonical terms of one k for a component (Y_k ~ N(X beta_k, sigma^2 Lambda_k)).
[[nodiscard]] inline std::vector<QuadFormTerm> component_terms_at(const ModelSpec& model, const WeightOperator& w,
                                                                  Component which, std::size_t k) {
    if (!(model.sigma > 0.0)) throw DomainError("component distribution requires sigma > 0");
    const Matrix a = component_kernel(model.X, model.lambda[k], w.W[k], which);
    return quadform_canonical(a, model.sigma * model.sigma * model.lambda[k], model.mean(k));
}

[[nodiscard]] inline QuadFormSpec component_distribution(const ModelSpec& model, const WeightOperator& w,
                                                         Component which) {
    detail::require_model_weights(model, w, "component_distribution");
    std::vector<QuadFormTerm> all;
    for (std::size_t k = 0; k < model.k_max(); ++k) {
        const auto t = component_terms_at(model, w, which, k);
        all.insert(all.end(), t.begin(), t.end());
    }
    return make_quadform_spec(all, to_string(which), model.k_max());
}

/// Hypothesis check of the MGF representation: every xi below one. Reported,
/// never enforced.
struct MgfHypothesisReport {
    double max_weight = 0.0;
    bool all_below_one = false;
    double reciprocal_trace = 0.0;  // 1 / sum xi
};

[[nodiscard]] inline MgfHypothesisReport mgf_hypothesis(const QuadFormSpec& spec) {
    MgfHypothesisReport r;
    double s = 0.0;
    for (const auto& t : spec.terms) s += t.weight;
    r.max_weight = spec.terms.empty() ? 0.0 : spec.max_weight();
    r.all_below_one = r.max_weight < 1.0;
    r.reciprocal_trace = s != 0.0 ? 1.0 / s : std::numeric_limits<double>::infinity();
    return r;
}

/// log E[exp(t Q)] = sum_i [-1/2 log(1 - 2 t xi_i) + t xi_i delta2_i / (1 - 2 t xi_i)].
[[nodiscard]] inline double log_mgf(const QuadFormSpec& spec, double t) {
    if (t >= spec.trace_bound) {
        throw DomainError("mgf: t=" + std::to_string(t) + " is not below the validity bound " +
                          std::to_string(spec.trace_bound));
    }
    double acc = 0.0;
    for (const auto& term : spec.terms) {
        const double f = 1.0 - 2.0 * t * term.weight;
        if (!(f > 0.0)) {
            throw DomainError("mgf: factor 1 - 2 t xi is not positive at t=" + std::to_string(t));
        }
        acc += -0.5 * std::log(f) + t * term.weight * term.noncentrality / f;
    }
    return acc;
}

[[nodiscard]] inline double mgf(const QuadFormSpec& spec, double t) {
    if (t == 0.0) return 1.0;
    return std::exp(log_mgf(spec, t));
}

[[nodiscard]] inline Complex log_cf_terms(const std::vector<QuadFormTerm>& terms, double omega) {
    Complex acc{0.0, 0.0};
    for (const auto& term : terms) {
        const Complex f{1.0, -2.0 * omega * term.weight};
        acc += -0.5 * std::log(f) + Complex{0.0, omega * term.weight * term.noncentrality} / f;
    }
    return acc;
}

/// E[exp(i omega Q)], principal branch per linear factor.
[[nodiscard]] inline Complex cf(const QuadFormSpec& spec, double omega) {
    if (omega == 0.0) return {1.0, 0.0};
    return std::exp(log_cf_terms(spec.terms, omega));
}

/// Canonical-route factor of one k: E[exp(t Y^T A Y)] from its (xi, delta2) terms.
[[nodiscard]] inline double canonical_mgf_factor(const std::vector<QuadFormTerm>& terms, double t) {
    double acc = 0.0;
    for (const auto& term : terms) {
        const double f = 1.0 - 2.0 * t * term.weight;
        if (!(f > 0.0)) throw DomainError("canonical_mgf_factor: non-positive factor");
        acc += -0.5 * std::log(f) + t * term.weight * term.noncentrality / f;
    }
    return std::exp(acc);
}

[[nodiscard]] inline Complex canonical_cf_factor(const std::vector<QuadFormTerm>& terms, double omega) {
    return std::exp(log_cf_terms(terms, omega));
}

/// Determinant route for one k, in the argument convention M(t/2) = E[exp((t/2) Y^T A Y)]:
///   det(I - t A V)^{-1/2} exp(-1/2 mu^T (I - (I - t A V)^{-1}) V^{-1} mu).
[[nodiscard]] inline double determinant_mgf_factor(const Matrix& a, const Matrix& v, const Vector& mu, double t) {
    const Eigen::Index n = a.rows();
    const Matrix id = Matrix::Identity(n, n);
    const Matrix m = id - t * a * v;
    const Eigen::PartialPivLU<Matrix> lu(m);
    const double det = lu.determinant();
    if (!(det > 0.0)) throw DomainError("determinant_mgf_factor: determinant is not positive");
    const Matrix inner = (id - lu.inverse()) * Eigen::LLT<Matrix>(v).solve(id);
    return std::pow(det, -0.5) * std::exp(-0.5 * mu.dot(inner * mu));
}

/// Determinant route for the CF of one k:
///   det(I - 2 i omega B)^{-1/2} exp(-2 omega^2 b^T (I - 2 i omega B)^{-1} b) exp(i omega mu^T A mu)
/// with B = V^{1/2} A V^{1/2} and b = V^{1/2} A mu. The half power of the
/// determinant is taken along the continuous branch from omega = 0.
[[nodiscard]] inline Complex determinant_cf_factor(const Matrix& a, const Matrix& v, const Vector& mu, double omega) {
    using CMatrix = Eigen::MatrixXcd;
    const Eigen::Index n = a.rows();
    const Matrix vh = spd_sqrt(v, "determinant_cf_factor covariance");
    const Matrix b_mat = vh * a * vh;
    const Vector b_vec = vh * (a * mu);
    const CMatrix id = CMatrix::Identity(n, n);
    auto det_at = [&](double w) {
        const CMatrix m = id - Complex{0.0, 2.0 * w} * b_mat.cast<Complex>();
        return Eigen::PartialPivLU<CMatrix>(m).determinant();
    };
    // Phase rate of the determinant is bounded by 2 sum |xi| <= 2 sqrt(n) ||B||_F.
    const double rate = 2.0 * std::sqrt(static_cast<double>(n)) * b_mat.norm();
    const auto steps = static_cast<std::size_t>(std::ceil(std::abs(omega) * rate / (std::numbers::pi / 8.0))) + 4;
    Complex prev = det_at(0.0);
    double phase = std::arg(prev);
    for (std::size_t s = 1; s <= steps; ++s) {
        const Complex cur = det_at(omega * static_cast<double>(s) / static_cast<double>(steps));
        phase += std::arg(cur / prev);
        prev = cur;
    }
    const Complex log_det{std::log(std::abs(prev)), phase};
    const CMatrix m = id - Complex{0.0, 2.0 * omega} * b_mat.cast<Complex>();
    const Eigen::VectorXcd solved = Eigen::PartialPivLU<CMatrix>(m).solve(b_vec.cast<Complex>());
    const Complex quad = b_vec.cast<Complex>().dot(solved);  // conjugates first arg, b is real
    return std::exp(-0.5 * log_det - 2.0 * omega * omega * quad + Complex{0.0, omega * mu.dot(a * mu)});
}

struct InversionOptions {
    double truncation_tolerance = 1e-8;
    double quadrature_tolerance = 1e-11;
    double accuracy_limit = 1e-6;
    std::size_t max_panels = 5'000'000;
};

namespace detail {

struct EnvelopeInfo {
    double envelope;  // bound on |cf(U)|
    double slope;     // local decay exponent of the envelope
    double phase_rate_bound;
};

inline EnvelopeInfo envelope_at(const QuadFormSpec& spec, double u) {
    double log_env = 0.0, slope = 0.0, rate = 0.0;
    for (const auto& t : spec.terms) {
        const double q = 4.0 * u * u * t.weight * t.weight;
        log_env += -0.25 * std::log1p(q) - 0.5 * q * t.noncentrality / (1.0 + q);
        slope += 0.5 * q / (1.0 + q);
        rate += std::abs(t.weight) * (1.0 + t.noncentrality) / (1.0 + q);
    }
    return {std::exp(log_env), slope, rate};
}

/// Bound on the inversion integral beyond U, divided by pi.
inline double truncation_error(const QuadFormSpec& spec, double x, double u) {
    const EnvelopeInfo e = envelope_at(spec, u);
    double err = std::numeric_limits<double>::infinity();
    if (e.slope > 0.0) err = e.envelope / (std::numbers::pi * e.slope);
    const double freq = std::abs(x) - e.phase_rate_bound;
    if (freq > 0.1 * std::abs(x) && freq > 0.0) {
        err = std::min(err, 2.0 * e.envelope / (std::numbers::pi * u * freq));
    }
    return err;
}

}  // namespace detail

/// P(Q <= x) by numerical inversion of the characteristic function:
///   F(x) = 1/2 - (1/pi) int_0^inf Im[exp(-i w x) cf(w)] / w dw.
/// The integral is truncated where the envelope bound falls below the
/// truncation tolerance and integrated panel by panel with adaptive
/// Gauss-Kronrod quadrature.
[[nodiscard]] inline double cdf(const QuadFormSpec& spec, double x, const InversionOptions& opt = {}) {
    if (!std::isfinite(x)) return x > 0 ? 1.0 : 0.0;
    if (spec.terms.empty()) return x >= 0.0 ? 1.0 : 0.0;
    if (spec.nonnegative() && x <= 0.0) return 0.0;
    if (spec.nonpositive() && x >= 0.0) return 1.0;

    double rate = std::abs(x);
    double max_abs = 0.0;
    for (const auto& t : spec.terms) {
        rate += std::abs(t.weight) * (1.0 + t.noncentrality);
        max_abs = std::max(max_abs, std::abs(t.weight));
    }
    const double h = 2.0 * std::numbers::pi / rate;

    double u = 1.0 / max_abs;
    double trunc = detail::truncation_error(spec, x, u);
    while (trunc > opt.truncation_tolerance) {
        if (u / h > static_cast<double>(opt.max_panels)) {
            throw AccuracyError("cdf: truncation point exceeds the panel budget", trunc);
        }
        u *= 1.5;
        trunc = detail::truncation_error(spec, x, u);
    }

    auto integrand = [&](double w) {
        double re = 0.0, im = -w * x;
        for (const auto& t : spec.terms) {
            const double a = 2.0 * w * t.weight;
            const double q = a * a;
            re -= 0.25 * std::log1p(q) + 0.5 * q * t.noncentrality / (1.0 + q);
            im += 0.5 * std::atan(a) + 0.5 * a * t.noncentrality / (1.0 + q);
        }
        return std::exp(re) * std::sin(im) / w;
    };
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    const auto panels = static_cast<std::size_t>(std::ceil(u / h));
    double integral = 0.0, quad_err = 0.0;
    for (std::size_t i = 0; i < panels; ++i) {
        const double a = h * static_cast<double>(i);
        const double b = std::min(u, a + h);
        double err = 0.0;
        integral += GK::integrate(integrand, a, b, 6, opt.quadrature_tolerance, &err);
        quad_err += err;
    }
    const double achieved = quad_err / std::numbers::pi + trunc;
    if (!(achieved <= opt.accuracy_limit) || !std::isfinite(integral)) {
        throw AccuracyError("cdf: inversion accuracy " + std::to_string(achieved) + " above limit", achieved);
    }
    return std::clamp(0.5 - integral / std::numbers::pi, 0.0, 1.0);
}

/// x with |cdf(x) - p| < tol, by Illinois-type regula falsi on a bracket
/// derived from one-sided Chebyshev (Cantelli) bounds.
[[nodiscard]] inline double quantile(const QuadFormSpec& spec, double p, double tol = 1e-7,
                                     const InversionOptions& opt = {}) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile: p must lie in (0, 1)");
    if (spec.terms.empty()) return 0.0;
    const double m = spec.mean();
    const double sd = std::sqrt(spec.variance());
    double lo = m - sd * std::sqrt((1.0 - p) / p);
    double hi = m + sd * std::sqrt(p / (1.0 - p));
    if (spec.nonnegative()) lo = std::max(lo, 0.0);
    if (spec.nonpositive()) hi = std::min(hi, 0.0);
    double flo = cdf(spec, lo, opt) - p;
    double fhi = cdf(spec, hi, opt) - p;
    for (int i = 0; i < 60 && (flo > 0.0 || fhi < 0.0); ++i) {
        const double width = std::max(hi - lo, sd);
        if (flo > 0.0) {
            lo -= width;
            if (spec.nonnegative()) lo = std::max(lo, 0.0);
            flo = cdf(spec, lo, opt) - p;
        }
        if (fhi < 0.0) {
            hi += width;
            fhi = cdf(spec, hi, opt) - p;
        }
    }
    if (flo > 0.0 || fhi < 0.0) throw NumericError("quantile: failed to bracket p=" + std::to_string(p));
    if (std::abs(flo) < tol) return lo;
    if (std::abs(fhi) < tol) return hi;

    int side = 0;
    for (int it = 0; it < 300; ++it) {
        double x = (lo * fhi - hi * flo) / (fhi - flo);
        if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
        const double fx = cdf(spec, x, opt) - p;
        if (std::abs(fx) < tol) return x;
        if (fx < 0.0) {
            lo = x;
            flo = fx;
            if (side == -1) fhi *= 0.5;
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if (side == 1) flo *= 0.5;
            side = 1;
        }
        if (hi - lo <= 1e-15 * std::max(std::abs(hi), 1.0)) {
            if (std::min(std::abs(flo), std::abs(fhi)) < 10.0 * tol) return std::abs(flo) < std::abs(fhi) ? lo : hi;
            break;
        }
    }
    throw NumericError("quantile: no convergence for p=" + std::to_string(p));
}

}  // namespace hfanova
