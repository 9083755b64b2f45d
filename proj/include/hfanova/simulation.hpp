#pragma once

// Monte Carlo generation in coefficient space and the empirical helpers used
// by the oracle tests. Draws come from a Philox4x32-10 counter-based
// generator keyed by the seed; the counter encodes (block, k, replicate), so
// every (k, replicate) pair owns an independent deterministic substream.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "hfanova/errors.hpp"
#include "hfanova/linalg.hpp"
#include "hfanova/model.hpp"
#include "hfanova/spectral_core.hpp"

namespace hfanova {

class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;
    using result_type = std::uint32_t;

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    /// The ten-round block function.
    static Counter block(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

    /// Stream (seed, stream_a, stream_b); words 0-1 of the counter run over blocks.
    Philox4x32(std::uint64_t seed, std::uint32_t stream_a, std::uint32_t stream_b)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_a_(stream_a),
          stream_b_(stream_b) {}

    result_type operator()() {
        if (pos_ == 4) {
            buf_ = block({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32), stream_a_,
                          stream_b_},
                         key_);
            ++block_;
            pos_ = 0;
        }
        return buf_[pos_++];
    }

private:
    Key key_;
    std::uint32_t stream_a_;
    std::uint32_t stream_b_;
    std::uint64_t block_ = 0;
    Counter buf_{};
    int pos_ = 4;
};

struct SimConfig {
    std::uint64_t seed = 0;
    std::size_t N = 1;
    std::size_t k_max = 0;  // 0 = use the model's K_max

    void validate() const {
        if (N < 1) throw ValidationError("SimConfig: N must be >= 1");
    }
};

/// Y_k = X beta_k + sigma L_k z_k with L_k L_k^T = Lambda_k, z_k standard normal.
/// Factors are computed once so repeated draws are cheap.
class DatasetSampler {
public:
    explicit DatasetSampler(const ModelSpec& model) : model_(model) {
        for (std::size_t k = 0; k < model_.k_max(); ++k) {
            Eigen::LLT<Matrix> llt(model_.lambda[k]);
            if (llt.info() != Eigen::Success) {
                throw DomainError("sample_dataset: Cholesky failed for Lambda_" + std::to_string(k + 1));
            }
            chol_.push_back(llt.matrixL());
            mean_.push_back(model_.mean(k));
        }
    }

    [[nodiscard]] CoefficientBlock operator()(std::uint64_t seed, std::uint32_t replicate = 0) const {
        const auto n = static_cast<Eigen::Index>(model_.n());
        Matrix y(static_cast<Eigen::Index>(model_.k_max()), n);
        Vector z(n);
        for (std::size_t k = 0; k < model_.k_max(); ++k) {
            Philox4x32 rng(seed, static_cast<std::uint32_t>(k), replicate);
            std::normal_distribution<double> normal;
            for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
            const auto kk = static_cast<Eigen::Index>(k);
            y.row(kk) = mean_[k].transpose();
            if (model_.sigma != 0.0) y.row(kk) += (model_.sigma * (chol_[k] * z)).transpose();
        }
        return {std::move(y), model_.basis()};
    }

private:
    ModelSpec model_;
    std::vector<Matrix> chol_;
    std::vector<Vector> mean_;
};

[[nodiscard]] inline CoefficientBlock sample_dataset(const ModelSpec& model, std::uint64_t seed,
                                                     std::uint32_t replicate = 0) {
    return DatasetSampler(model)(seed, replicate);
}

/// Right-continuous step function of a sample.
class EmpiricalCdf {
public:
    explicit EmpiricalCdf(std::vector<double> values) : sorted_(std::move(values)) {
        if (sorted_.empty()) throw ValidationError("EmpiricalCdf: empty sample");
        std::sort(sorted_.begin(), sorted_.end());
    }

    [[nodiscard]] double operator()(double x) const {
        const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
        return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
    }

    /// Left limit F(x-).
    [[nodiscard]] double left(double x) const {
        const auto it = std::lower_bound(sorted_.begin(), sorted_.end(), x);
        return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
    }

    [[nodiscard]] const std::vector<double>& sorted() const noexcept { return sorted_; }
    [[nodiscard]] std::size_t size() const noexcept { return sorted_.size(); }

private:
    std::vector<double> sorted_;
};

struct McMoments {
    double mean = 0.0;
    double variance = 0.0;  // unbiased; 0 for a single value
    double std_error = 0.0;
    std::size_t n = 0;
};

[[nodiscard]] inline McMoments mc_moments(const std::vector<double>& values) {
    if (values.empty()) throw ValidationError("mc_moments: empty sample");
    McMoments m;
    m.n = values.size();
    double mean = 0.0, m2 = 0.0;
    std::size_t i = 0;
    for (double v : values) {
        ++i;
        const double d = v - mean;
        mean += d / static_cast<double>(i);
        m2 += d * (v - mean);
    }
    m.mean = mean;
    m.variance = m.n > 1 ? m2 / static_cast<double>(m.n - 1) : 0.0;
    m.std_error = std::sqrt(m.variance / static_cast<double>(m.n));
    return m;
}

/// Exact Kolmogorov-Smirnov distance against a continuous CDF evaluated at every point.
[[nodiscard]] inline double ks_distance(const EmpiricalCdf& ecdf, const std::function<double(double)>& cdf) {
    const auto& s = ecdf.sorted();
    const double n = static_cast<double>(s.size());
    double d = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double f = cdf(s[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

struct KsBounds {
    double lower = 0.0;  // sup over the grid points only
    double upper = 0.0;  // valid for any nondecreasing cdf
};

/// Kolmogorov-Smirnov distance when the CDF is expensive: the CDF is evaluated
/// at `grid` empirical quantiles only. Monotonicity of both functions between
/// grid points gives a rigorous upper bound.
[[nodiscard]] inline KsBounds ks_distance_grid(const EmpiricalCdf& ecdf, const std::function<double(double)>& cdf,
                                               std::size_t grid) {
    const auto& s = ecdf.sorted();
    grid = std::max<std::size_t>(2, std::min(grid, s.size()));
    std::vector<double> xs;
    for (std::size_t j = 0; j < grid; ++j) {
        xs.push_back(s[(j * (s.size() - 1)) / (grid - 1)]);
    }
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::vector<double> fs;
    fs.reserve(xs.size());
    for (double x : xs) fs.push_back(cdf(x));
    KsBounds b;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        b.lower = std::max({b.lower, std::abs(ecdf(xs[j]) - fs[j]), std::abs(ecdf.left(xs[j]) - fs[j])});
    }
    // Below the sample minimum the ECDF is 0, above the maximum it is 1.
    double up = std::max(fs.front(), 1.0 - fs.back());
    for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
        // On (x_j, x_{j+1}): ECDF in [E(x_j), E(x_{j+1}-)], cdf in [F(x_j), F(x_{j+1})].
        up = std::max({up, ecdf.left(xs[j + 1]) - fs[j], fs[j + 1] - ecdf(xs[j])});
    }
    b.upper = std::max({up, b.lower});
    return b;
}

/// Asymptotic Kolmogorov p-value P(D_N > d) with the Stephens small-sample correction.
[[nodiscard]] inline double kolmogorov_pvalue(double d, std::size_t n) {
    if (n == 0) throw ValidationError("kolmogorov_pvalue: n must be positive");
    if (d <= 0.0) return 1.0;
    const double sn = std::sqrt(static_cast<double>(n));
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += (j % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

struct BinomialInterval {
    double lo = 0.0;
    double hi = 1.0;
    [[nodiscard]] bool contains(double x) const { return x >= lo && x <= hi; }
};

/// p +/- z sqrt(p (1 - p) / N).
[[nodiscard]] inline BinomialInterval binomial_interval(double p, std::size_t n, double z) {
    const double half = z * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    return {p - half, p + half};
}

/// Sample Pearson correlation.
[[nodiscard]] inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw DimensionError("correlation: need equal sizes >= 2");
    const McMoments ma = mc_moments(a), mb = mc_moments(b);
    double c = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) c += (a[i] - ma.mean) * (b[i] - mb.mean);
    c /= static_cast<double>(a.size() - 1);
    return c / std::sqrt(ma.variance * mb.variance);
}

}  // namespace hfanova
