#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "hfanova/anova.hpp"
#include "hfanova/simulation.hpp"

using namespace hfanova;

TEST(ResidualProjector, SaturatedIsZero) {
    std::mt19937_64 rng(1);
    const Matrix x = testutil::random_matrix(rng, 3, 3);
    const Matrix c = testutil::random_correlation(rng, 3);
    EXPECT_LE(residual_projector(x, c).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ResidualProjector, CenteringProjector) {
    Matrix x(2, 1);
    x << 1, 1;
    Matrix expect(2, 2);
    expect << 0.5, -0.5, -0.5, 0.5;
    EXPECT_LE((residual_projector(x, Matrix::Identity(2, 2)) - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ResidualProjector, IdempotentAndAnnihilatesDesign) {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        const auto inst = testutil::random_instance(rng, 6, 3, 5);
        for (std::size_t k = 0; k < inst.k_max; ++k) {
            const Matrix m = residual_projector(inst.model.X, inst.model.lambda[k]);
            EXPECT_LE((m * m - m).norm(), 1e-10 * std::max(1.0, m.norm()));
            EXPECT_LE((m * inst.model.X).norm(), 1e-10 * std::max(1.0, inst.model.X.norm()));
        }
    }
}

TEST(ComponentKernel, IdentitiesAndSigns) {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const auto inst = testutil::random_instance(rng, 6, 3, 4);
        const ModelSpec& m = inst.model;
        const WeightOperator w = build_weights(m.lambda, WeightPlan{});
        for (std::size_t k = 0; k < inst.k_max; ++k) {
            const Matrix sst = component_kernel(m.X, m.lambda[k], w.W[k], Component::sst);
            const Matrix ssr = component_kernel(m.X, m.lambda[k], w.W[k], Component::ssr);
            const Matrix sse = component_kernel(m.X, m.lambda[k], w.W[k], Component::sse);
            EXPECT_LE((sst - ssr - sse).norm(), 1e-12 * std::max(1.0, sst.norm()));
            const double scale = sst.norm();
            EXPECT_GE(symmetric_eigen(ssr).values.minCoeff(), -1e-12 * scale);
            EXPECT_GE(symmetric_eigen(sse).values.minCoeff(), -1e-12 * scale);
            EXPECT_GT(symmetric_eigen(sst).values.minCoeff(), 0.0);
        }
    }
}

TEST(ComponentKernel, IdentityWeightsGiveLambdaInverse) {
    Matrix l(2, 2);
    l << 2, 0.5, 0.5, 1;
    const Matrix a = component_kernel(Matrix::Identity(2, 1), l, Matrix::Identity(2, 2), Component::sst);
    EXPECT_LE((a - l.inverse()).norm(), 1e-14);
    const Matrix sse = component_kernel(Matrix::Identity(2, 2), l, Matrix::Identity(2, 2), Component::sse);
    EXPECT_LE(sse.norm(), 1e-14);
    EXPECT_THROW((void)component_from_string("total"), ValidationError);
}

TEST(SumSquares, ZeroDataAndSaturatedDesign) {
    std::mt19937_64 rng(4);
    const auto lam = build_lambda(SpectrumFamily::power_law({1, 2, 3}, {2, 2.5, 3}, 10, testutil::random_correlation(rng, 3)), 10);
    const WeightOperator w = build_weights(lam, WeightPlan{});
    const ModelSpec sat(Matrix::Identity(3, 3), lam);
    const VarianceComponents z = sum_squares(sat, w, CoefficientBlock::zeros(BasisMeta(10), 3));
    EXPECT_EQ(z.sst, 0.0);
    EXPECT_EQ(z.sse, 0.0);
    EXPECT_EQ(z.ssr, 0.0);
    const VarianceComponents v = sum_squares(sat, w, sample_dataset(sat, 5));
    EXPECT_LE(std::abs(v.sse), 1e-12 * v.sst);
    EXPECT_NEAR(v.ssr, v.sst, 1e-12 * v.sst);
}

TEST(SumSquares, MatchesBilinearFormOracle) {
    Matrix x(2, 1);
    x << 1, 2;
    Matrix rho(2, 2);
    rho << 1, 0.4, 0.4, 1;
    const auto lam = build_lambda(SpectrumFamily::power_law({1.0, 0.5}, {2.0, 2.5}, 3, rho), 3);
    const ModelSpec m(x, lam, project({{1.0}, {0.5}, {-0.25}}, 1));
    const WeightOperator w = build_weights(lam, WeightPlan{});
    const CoefficientBlock y = sample_dataset(m, 17);
    const VarianceComponents vc = sum_squares(m, w, y, true);

    const CoefficientBlock wy = op_apply(w.W, y);
    const auto lam_inv = op_inverse(lam);
    const double sst = bilinear_form(lam_inv, wy, wy);
    std::vector<Matrix> ms;
    for (std::size_t k = 0; k < 3; ++k) ms.push_back(residual_projector(x, lam[k]));
    const CoefficientBlock r = op_apply(SpectralMatrixOperator(ms, BasisMeta(3)), wy);
    const double sse = bilinear_form(lam_inv, r, r);
    EXPECT_NEAR(vc.sst, sst, 1e-12 * sst);
    EXPECT_NEAR(vc.sse, sse, 1e-12 * sst);
    EXPECT_NEAR(vc.ssr, sst - sse, 1e-12 * sst);
}

TEST(SumSquares, DecompositionAndEvaluatorAgree) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        const auto inst = testutil::random_instance(rng, 6, 3, 20);
        const WeightOperator w = build_weights(inst.model.lambda, WeightPlan{});
        const CoefficientBlock y = sample_dataset(inst.model, rep);
        const VarianceComponents a = sum_squares(inst.model, w, y, true);
        const VarianceComponents b = ComponentEvaluator(inst.model, w)(y);
        EXPECT_LE(std::abs(a.sst - a.sse - a.ssr), 1e-10 * a.sst);
        EXPECT_NEAR(a.sst, b.sst, 1e-10 * a.sst);
        EXPECT_NEAR(a.sse, b.sse, 1e-10 * a.sst);
        for (std::size_t k = 0; k < inst.k_max; ++k) {
            EXPECT_GE(a.sst_k[k], 0.0);
            EXPECT_GE(a.sse_k[k], 0.0);
            EXPECT_GE(a.ssr_k[k], 0.0);
        }
    }
}

TEST(SumSquares, UnvalidatedWeightsWarn) {
    const std::size_t k_max = 200;
    const auto lam = SpectralMatrixOperator::generate(BasisMeta(k_max), [](std::size_t k) {
        return Matrix(Matrix::Identity(2, 2) / static_cast<double>(k * k));
    });
    const WeightOperator w = make_weight_operator(SpectralMatrixOperator::identity(BasisMeta(k_max), 2), lam);
    const ModelSpec m(Matrix::Identity(2, 1), lam);
    const VarianceComponents vc = sum_squares(m, w, sample_dataset(m, 1));
    EXPECT_FALSE(vc.warnings.empty());
}

TEST(ExpectedComponents, CentralIdentityWeights) {
    std::mt19937_64 rng(6);
    const Matrix l = testutil::random_correlation(rng, 4) * 2.5;
    const auto lam = SpectralMatrixOperator({l}, BasisMeta(1), {true, true});
    const WeightOperator w = make_weight_operator(SpectralMatrixOperator::identity(BasisMeta(1), 4), lam);
    const ModelSpec m(testutil::random_matrix(rng, 4, 2), lam);
    const ExpectedComponents e = expected_components(m, w);
    EXPECT_NEAR(e.e_sst, 4.0, 1e-12);
    EXPECT_NEAR(e.e_ssr, 2.0, 1e-12);
    EXPECT_NEAR(e.e_sse, 2.0, 1e-12);
}

TEST(ExpectedComponents, SaturatedHasZeroSse) {
    std::mt19937_64 rng(7);
    const auto inst = testutil::random_instance(rng, 3, 3, 10);
    const ModelSpec sat(Matrix::Identity(static_cast<Eigen::Index>(inst.n), static_cast<Eigen::Index>(inst.n)),
                        inst.model.lambda);
    const ExpectedComponents e = expected_components(sat, build_weights(sat.lambda, WeightPlan{}));
    EXPECT_LE(std::abs(e.e_sse), 1e-12 * e.e_sst);
}

TEST(ExpectedComponents, MonteCarloOracle) {
    Matrix x(3, 2);
    x << 1, 0, 1, 1, 1, 2;
    Matrix rho(3, 3);
    rho << 1, 0.2, 0.0, 0.2, 1, 0.3, 0.0, 0.3, 1;
    const std::size_t k_max = 5;
    const auto lam = build_lambda(SpectrumFamily::power_law({1, 1.5, 0.7}, {2, 2, 2.5}, k_max, rho), k_max);
    Matrix beta(k_max, 2);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(k_max); ++k) beta.row(k) << 1.0 / (k + 1), -0.5 / (k + 1);
    const ModelSpec m(x, lam, CoefficientBlock(beta, BasisMeta(k_max)), 0.8);
    WeightPlan plan;
    plan.mode = WeightMode::sst;
    const WeightOperator w = build_weights(lam, plan);
    const ExpectedComponents e = expected_components(m, w);
    const ComponentEvaluator eval(m, w);
    const DatasetSampler sampler(m);
    std::vector<double> sst, sse;
    for (std::uint32_t r = 0; r < 100000; ++r) {
        const VarianceComponents vc = eval(sampler(2024, r));
        sst.push_back(vc.sst);
        sse.push_back(vc.sse);
    }
    const McMoments a = mc_moments(sst), b = mc_moments(sse);
    EXPECT_NEAR(e.e_sst, a.mean, 3.0 * a.std_error);
    EXPECT_NEAR(e.e_sse, b.mean, 3.0 * b.std_error);
}

TEST(UntransformedSst, MeanDivergesWithKmax) {
    const std::size_t k_max = 400;
    const auto lam = SpectralMatrixOperator::generate(BasisMeta(k_max), [](std::size_t k) {
        return Matrix(Matrix::Identity(2, 2) / static_cast<double>(k * k));
    });
    const ModelSpec m(Matrix::Identity(2, 1), lam);
    const SeriesReport r = untransformed_sst(m, sample_dataset(m, 3));
    EXPECT_FALSE(r.converged);
    EXPECT_GT(r.total, 400.0);
}
