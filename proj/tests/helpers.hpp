#pragma once

#include <cstdint>
#include <random>

#include "hfanova/model.hpp"
#include "hfanova/spectral_core.hpp"

namespace hfanova::testutil {

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> nd;
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(rng);
    return m;
}

/// Random correlation matrix with eigenvalues bounded away from zero.
inline Matrix random_correlation(std::mt19937_64& rng, Eigen::Index n) {
    const Matrix a = random_matrix(rng, n, n);
    Matrix s = a * a.transpose() + Matrix::Identity(n, n) * static_cast<double>(n);
    const Vector d = s.diagonal().cwiseSqrt().cwiseInverse();
    Matrix r = d.asDiagonal() * s * d.asDiagonal();
    r = 0.5 * (r + r.transpose());
    r.diagonal().setOnes();
    return r;
}

struct Instance {
    ModelSpec model;
    std::size_t n, p, k_max;
};

/// Random model with n <= max_n, p <= max_p, K_max <= max_k and power-law spectrum.
inline Instance random_instance(std::mt19937_64& rng, std::size_t max_n = 6, std::size_t max_p = 3,
                                std::size_t max_k = 50, double sigma = 1.0) {
    std::uniform_int_distribution<std::size_t> pn(1, max_p);
    const std::size_t p = pn(rng);
    std::uniform_int_distribution<std::size_t> nn(p, std::max(p, max_n));
    const std::size_t n = nn(rng);
    std::uniform_int_distribution<std::size_t> kn(1, max_k);
    const std::size_t k = kn(rng);
    std::uniform_real_distribution<double> scale(0.5, 2.0), expo(1.2, 3.0);
    std::vector<double> sc(n), ex(n);
    for (std::size_t i = 0; i < n; ++i) {
        sc[i] = scale(rng);
        ex[i] = expo(rng);
    }
    const auto fam = SpectrumFamily::power_law(sc, ex, k, random_correlation(rng, static_cast<Eigen::Index>(n)));
    Matrix x = random_matrix(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    Matrix beta = random_matrix(rng, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p));
    for (Eigen::Index r = 0; r < beta.rows(); ++r) beta.row(r) /= static_cast<double>((r + 1) * (r + 1));
    return {ModelSpec(x, build_lambda(fam, k), CoefficientBlock(beta, BasisMeta(k)), sigma), n, p, k};
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace hfanova::testutil
