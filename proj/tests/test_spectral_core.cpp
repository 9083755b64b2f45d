#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "hfanova/spectral_core.hpp"

using namespace hfanova;

TEST(Project, PacksRows) {
    const CoefficientBlock b = project({{1, 2}, {3, 4}}, 2);
    EXPECT_EQ(b.k_max(), 2u);
    EXPECT_EQ(b.row(0), (Vector(2) << 1, 2).finished());
    EXPECT_EQ(b.row(1), (Vector(2) << 3, 4).finished());
    EXPECT_EQ(reconstruct(b), (std::vector<std::vector<double>>{{1, 2}, {3, 4}}));
}

TEST(Project, ZeroRowsGiveZeroBlock) {
    const CoefficientBlock b = project({{0, 0, 0}, {0, 0, 0}}, 3);
    EXPECT_EQ(b.squared_norm(), 0.0);
}

TEST(Project, RaggedOrEmptyInputRejected) {
    EXPECT_THROW((void)project({{1, 2}, {3}}, 2), DimensionError);
    EXPECT_THROW((void)project({}, 2), DimensionError);
    EXPECT_THROW((void)project({{1, 2}}, 2, BasisMeta(3)), DimensionError);
}

TEST(Project, RandomRoundTripIsBitIdentical) {
    std::mt19937_64 rng(7);
    for (auto [rows, cols] : {std::pair{50, 3}, std::pair{100, 5}, std::pair{1, 4}}) {
        const Matrix m = testutil::random_matrix(rng, rows, cols);
        const CoefficientBlock b(m, BasisMeta(static_cast<std::size_t>(rows)));
        const auto r = reconstruct(b);
        const CoefficientBlock back = project(r, static_cast<std::size_t>(cols));
        EXPECT_TRUE(back.data() == m);
        EXPECT_EQ(reconstruct(back), r);
    }
}

TEST(CoefficientBlock, ParsevalNorm) {
    const CoefficientBlock b = project({{1, 2}, {3, 4}}, 2);
    EXPECT_DOUBLE_EQ(b.squared_norm(), 30.0);
}

TEST(CoefficientBlock, RejectsNonFinite) {
    Matrix m(1, 1);
    m(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(CoefficientBlock(m, BasisMeta(1)), ValidationError);
    EXPECT_THROW(CoefficientBlock(Matrix::Zero(2, 1), BasisMeta(1)), DimensionError);
}

TEST(SpectralMatrixOperator, ValidatesShapesAndFlags) {
    EXPECT_THROW(SpectralMatrixOperator({Matrix::Identity(2, 2), Matrix::Identity(3, 3)}, BasisMeta(2)),
                 DimensionError);
    Matrix asym(2, 2);
    asym << 1, 2, 0, 1;
    EXPECT_THROW(SpectralMatrixOperator({asym}, BasisMeta(1), {true, false}), ValidationError);
    EXPECT_NO_THROW(SpectralMatrixOperator({asym}, BasisMeta(1)));
    Matrix indef(2, 2);
    indef << 1, 0, 0, -1;
    EXPECT_THROW(SpectralMatrixOperator({indef}, BasisMeta(1), {true, true}), DomainError);
    EXPECT_THROW(SpectralMatrixOperator({Matrix::Identity(2, 2)}, BasisMeta(2)), DimensionError);
}

TEST(OpApply, IdentityAndZero) {
    const CoefficientBlock f = project({{1, 2}, {3, 4}, {5, 6}}, 2);
    const auto id = SpectralMatrixOperator::identity(f.basis(), 2);
    EXPECT_TRUE(op_apply(id, f).data() == f.data());
    const auto zero = SpectralMatrixOperator::generate(f.basis(), [](std::size_t) { return Matrix::Zero(2, 2); });
    EXPECT_EQ(op_apply(zero, f).squared_norm(), 0.0);
}

TEST(OpApply, MatchesNaiveLoop) {
    std::mt19937_64 rng(11);
    const std::size_t k = 20;
    std::vector<Matrix> mats;
    for (std::size_t i = 0; i < k; ++i) mats.push_back(testutil::random_matrix(rng, 2, 2));
    const SpectralMatrixOperator a(mats, BasisMeta(k));
    const CoefficientBlock f(testutil::random_matrix(rng, k, 2), BasisMeta(k));
    const CoefficientBlock g = op_apply(a, f);
    for (std::size_t kk = 0; kk < k; ++kk) {
        for (int r = 0; r < 2; ++r) {
            double acc = 0.0;
            for (int c = 0; c < 2; ++c) acc += mats[kk](r, c) * f.data()(static_cast<Eigen::Index>(kk), c);
            EXPECT_NEAR(g.data()(static_cast<Eigen::Index>(kk), r), acc, 1e-14);
        }
    }
}

TEST(OpApply, MismatchErrors) {
    const CoefficientBlock f = project({{1, 2}}, 2);
    EXPECT_THROW((void)op_apply(SpectralMatrixOperator::identity(BasisMeta(1), 3), f), DimensionError);
    EXPECT_THROW((void)op_apply(SpectralMatrixOperator::identity(BasisMeta(2), 2), f), BasisError);
}

TEST(BilinearForm, IdentityIsEuclidean) {
    const CoefficientBlock f = project({{1, 2}, {3, 4}}, 2);
    const CoefficientBlock g = project({{-1, 0.5}, {2, 1}}, 2);
    const auto id = SpectralMatrixOperator::identity(f.basis(), 2);
    EXPECT_DOUBLE_EQ(bilinear_form(id, f, g), -1 + 1 + 6 + 4);
}

TEST(BilinearForm, MatchesTripleLoop) {
    std::mt19937_64 rng(3);
    std::vector<Matrix> mats;
    for (int k = 0; k < 3; ++k) {
        const Matrix a = testutil::random_matrix(rng, 2, 2);
        mats.push_back(a * a.transpose() + Matrix::Identity(2, 2));
    }
    const SpectralMatrixOperator a(mats, BasisMeta(3), {true, true});
    const CoefficientBlock f(testutil::random_matrix(rng, 3, 2), BasisMeta(3));
    const CoefficientBlock g(testutil::random_matrix(rng, 3, 2), BasisMeta(3));
    double acc = 0.0;
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) acc += g.data()(k, i) * mats[static_cast<std::size_t>(k)](i, j) * f.data()(k, j);
    EXPECT_NEAR(bilinear_form(a, f, g), acc, 1e-13);
}

TEST(OpInverse, IdentityAndSingular) {
    const auto id = SpectralMatrixOperator::identity(BasisMeta(4), 3);
    const auto inv = op_inverse(id);
    for (const Matrix& m : inv.mats()) EXPECT_TRUE(m.isApprox(Matrix::Identity(3, 3), 1e-15));
    Matrix near(2, 2);
    near << 1, 0, 0, 1e-14;
    EXPECT_THROW((void)op_inverse(SpectralMatrixOperator({near}, BasisMeta(1))), SingularityError);
    Matrix asym(2, 2);
    asym << 2, 1, 0, 2;
    EXPECT_THROW((void)op_inverse(SpectralMatrixOperator({asym}, BasisMeta(1))), DomainError);
}

TEST(OpSqrt, RecomposesAndRejectsIndefinite) {
    std::mt19937_64 rng(5);
    const auto fam = SpectrumFamily::power_law({1.0, 2.0, 0.5}, {2.0, 1.5, 3.0}, 30,
                                               testutil::random_correlation(rng, 3));
    const auto lam = build_lambda(fam, 30);
    const auto root = op_sqrt(lam);
    const auto back = op_compose(root, root);
    for (std::size_t k = 0; k < lam.k_max(); ++k) {
        EXPECT_LE((back[k] - lam[k]).norm(), 1e-10 * lam[k].norm());
    }
    Matrix indef(2, 2);
    indef << 1, 0, 0, -1;
    EXPECT_THROW((void)op_sqrt(SpectralMatrixOperator({indef}, BasisMeta(1))), DomainError);
}

TEST(OpTrace, AnalyticPartialSum) {
    const std::size_t k_max = 10000;
    const auto lam = SpectralMatrixOperator::generate(BasisMeta(k_max), [](std::size_t k) {
        return Matrix(Matrix::Identity(2, 2) / static_cast<double>(k * k));
    });
    double expect = 0.0;
    for (std::size_t k = k_max; k >= 1; --k) expect += 2.0 / static_cast<double>(k * k);
    EXPECT_NEAR(op_trace(lam), expect, 1e-12);
    EXPECT_NEAR(op_trace(lam), 3.2896681436961195, 1e-11);
}

TEST(OpTrace, DivergentSeriesRaises) {
    const auto lam = SpectralMatrixOperator::generate(BasisMeta(100), [](std::size_t k) {
        return Matrix(Matrix::Identity(2, 2) / static_cast<double>(k));
    });
    EXPECT_THROW((void)op_trace(lam), ConvergenceError);
    const SeriesReport r = trace_series(lam);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.partial_sums.size(), 100u);
}

TEST(OpCompose, ShapeMismatch) {
    const auto a = SpectralMatrixOperator::identity(BasisMeta(2), 2);
    const auto b = SpectralMatrixOperator::identity(BasisMeta(2), 3);
    EXPECT_THROW((void)op_compose(a, b), DimensionError);
}
