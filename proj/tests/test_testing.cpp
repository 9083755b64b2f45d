#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <random>

#include "helpers.hpp"
#include "hfanova/simulation.hpp"
#include "hfanova/testing.hpp"

using namespace hfanova;

namespace {

ModelSpec design_model(std::size_t k_max, double sigma = 1.0) {
    Matrix x(4, 2);
    x << 1, 0, 1, 1, 1, 2, 1, 3;
    Matrix rho(4, 4);
    rho << 1, 0.3, 0.1, 0.0, 0.3, 1, 0.2, 0.1, 0.1, 0.2, 1, 0.3, 0.0, 0.1, 0.3, 1;
    const auto lam = build_lambda(SpectrumFamily::power_law({1, 1.5, 0.7, 1.2}, {2, 2.5, 2, 3}, k_max, rho), k_max);
    return {x, lam, sigma};
}

TestSpec slope_test(std::size_t k_max, double alpha = 0.05) {
    TestSpec t;
    t.K = SpectralMatrixOperator::generate(BasisMeta(k_max), [](std::size_t) { return Matrix((Matrix(1, 2) << 0, 1).finished()); });
    t.C = CoefficientBlock::zeros(BasisMeta(k_max), 1);
    t.alpha = alpha;
    return t;
}

}  // namespace

TEST(GlobalStat, HandCases) {
    const auto k = SpectralMatrixOperator::generate(BasisMeta(2), [](std::size_t) { return Matrix((Matrix(1, 2) << 1, 0).finished()); });
    const CoefficientBlock b = project({{3, 7}, {3, 7}}, 2);
    EXPECT_DOUBLE_EQ(global_stat(k, b, CoefficientBlock::zeros(BasisMeta(2), 1)), 18.0);
    EXPECT_DOUBLE_EQ(global_stat(k, b, project({{3}, {3}}, 1)), 0.0);
    EXPECT_THROW((void)global_stat(k, project({{1, 2, 3}, {1, 2, 3}}, 3), CoefficientBlock::zeros(BasisMeta(2), 1)),
                 DimensionError);
}

TEST(GlobalStat, MatchesBilinearForm) {
    std::mt19937_64 rng(1);
    std::vector<Matrix> mats;
    for (int l = 0; l < 7; ++l) mats.push_back(testutil::random_matrix(rng, 2, 3));
    const SpectralMatrixOperator k(mats, BasisMeta(7));
    const CoefficientBlock b(testutil::random_matrix(rng, 7, 3), BasisMeta(7));
    const CoefficientBlock c(testutil::random_matrix(rng, 7, 2), BasisMeta(7));
    const CoefficientBlock kb = op_apply(k, b);
    const CoefficientBlock d(kb.data() - c.data(), BasisMeta(7));
    EXPECT_NEAR(global_stat(k, b, c), bilinear_form(SpectralMatrixOperator::identity(BasisMeta(7), 2), d, d), 1e-12);
}

TEST(NullDistribution, IdentityCaseIsChiSquare) {
    const std::size_t k_max = 4;
    const ModelSpec m(Matrix::Identity(3, 3), SpectralMatrixOperator::identity(BasisMeta(k_max), 3));
    const auto k = SpectralMatrixOperator::identity(BasisMeta(k_max), 3);
    const NullDistribution nd = null_distribution(k, m);
    ASSERT_EQ(nd.spec.terms.size(), 12u);
    for (const auto& t : nd.spec.terms) {
        EXPECT_NEAR(t.weight, 1.0, 1e-14);
        EXPECT_EQ(t.noncentrality, 0.0);
    }
    boost::math::chi_squared chi(12);
    EXPECT_NEAR(cdf(nd.spec, 10.0), boost::math::cdf(chi, 10.0), 1e-6);
    EXPECT_FALSE(nd.condition_violations.empty());
}

TEST(NullDistribution, ScalarCase) {
    const std::size_t k_max = 5;
    Matrix x(3, 1);
    x << 1, 2, 0.5;
    const auto lam = build_lambda(SpectrumFamily::power_law({1, 2, 0.5}, {2, 2, 2}, k_max), k_max);
    const ModelSpec m(x, lam, 1.3);
    const auto k = SpectralMatrixOperator::generate(BasisMeta(k_max), [](std::size_t l) {
        return Matrix(Matrix::Constant(1, 1, 0.5 + static_cast<double>(l)));
    });
    const NullDistribution nd = null_distribution(k, m);
    ASSERT_EQ(nd.spec.terms.size(), k_max);
    for (std::size_t l = 0; l < k_max; ++l) {
        const double q = 1.3 * 1.3 / (x.transpose() * lam[l].inverse() * x)(0, 0);
        const double kl = 0.5 + static_cast<double>(l + 1);
        EXPECT_NEAR(nd.spec.terms[l].weight, q * kl * kl, 1e-12 * q * kl * kl);
    }
}

TEST(NullDistribution, DeterminantCfAgrees) {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 10; ++rep) {
        const auto inst = testutil::random_instance(rng, 5, 3, 4);
        const ModelSpec& m = inst.model;
        std::vector<Matrix> mats;
        for (std::size_t l = 0; l < inst.k_max; ++l) mats.push_back(testutil::random_matrix(rng, 1, static_cast<Eigen::Index>(inst.p)));
        const SpectralMatrixOperator k(mats, m.basis());
        const NullDistribution nd = null_distribution(k, m);
        const auto q = coefficient_covariance(m);
        for (double omega : {0.05, 0.4, 2.0}) {
            Complex direct{1.0, 0.0};
            for (std::size_t l = 0; l < inst.k_max; ++l) {
                const Matrix kk = k[l].transpose() * k[l];
                direct *= determinant_cf_factor(kk, q[l], Vector::Zero(static_cast<Eigen::Index>(inst.p)), omega);
            }
            const Complex canon = cf(nd.spec, omega);
            EXPECT_LE(std::abs(direct - canon), 1e-10);
        }
    }
}

TEST(PerkChisq, HandCasesAndRank) {
    EXPECT_NEAR(perk_chisq(Matrix::Identity(2, 2), (Vector(2) << 1, 2).finished(), (Vector(2) << 1, 2).finished(),
                           Matrix::Identity(2, 2), Matrix::Identity(2, 2)),
                0.0, 1e-15);
    EXPECT_NEAR(perk_chisq(Matrix::Identity(2, 2), (Vector(2) << 1, 2).finished(), (Vector(2) << 0, -1).finished(),
                           Matrix::Identity(2, 2), Matrix::Identity(2, 2)),
                10.0, 1e-14);
    Matrix k(2, 2);
    k << 1, 1, 2, 2;
    EXPECT_THROW((void)perk_chisq(k, Vector::Zero(2), Vector::Zero(2), Matrix::Identity(2, 2), Matrix::Identity(2, 2)),
                 RankError);
}

TEST(PerkChisq, ChiSquareUnderNull) {
    const std::size_t k_max = 3;
    const ModelSpec m = design_model(k_max, 0.9);
    TestSpec t;
    t.K = SpectralMatrixOperator::generate(BasisMeta(k_max), [](std::size_t) { return Matrix(Matrix::Identity(2, 2)); });
    t.C = CoefficientBlock::zeros(BasisMeta(k_max), 2);
    const LinearHypothesisTest test(m, t);
    const DatasetSampler sampler(m);
    std::vector<double> stats;
    for (std::uint32_t r = 0; r < 10000; ++r) stats.push_back(test.evaluate(sampler(77, r), false).per_l[1]);
    boost::math::chi_squared chi(2);
    const double d = ks_distance(EmpiricalCdf(stats), [&](double x) { return boost::math::cdf(chi, x); });
    EXPECT_GT(kolmogorov_pvalue(d, stats.size()), 0.01);
}

TEST(LinearHypothesisTest, EstimateMatchesGls) {
    const ModelSpec m = design_model(6);
    const LinearHypothesisTest test(m, slope_test(6));
    const CoefficientBlock y = sample_dataset(m, 3);
    EXPECT_LE((test.estimate(y).data() - gls_fit(m, y).beta_hat.data()).cwiseAbs().maxCoeff(), 1e-10);
    const TestResult r = run_test(m, y, slope_test(6));
    EXPECT_EQ(r.reject, r.statistic > r.critical_value);
    EXPECT_NEAR(r.p_value, 1.0 - cdf(test.null_spec(), r.statistic), 1e-12);
    EXPECT_NEAR(cdf(test.null_spec(), test.critical_value()), 0.95, 2e-6);
}

TEST(LinearHypothesisTest, SizeAndPower) {
    const std::size_t k_max = 5;
    const ModelSpec null_model = design_model(k_max);
    const LinearHypothesisTest test(null_model, slope_test(k_max, 0.1));
    const DatasetSampler sampler(null_model);
    std::size_t rejects = 0;
    std::vector<double> pvals;
    const std::size_t n = 4000;
    for (std::uint32_t r = 0; r < n; ++r) {
        const TestResult res = test.evaluate(sampler(11, r), r < 500);
        rejects += res.reject ? 1 : 0;
        if (r < 500) pvals.push_back(res.p_value);
    }
    EXPECT_TRUE(binomial_interval(0.1, n, 3.0).contains(static_cast<double>(rejects) / n));
    const double d = ks_distance(EmpiricalCdf(pvals), [](double u) { return std::clamp(u, 0.0, 1.0); });
    EXPECT_GT(kolmogorov_pvalue(d, pvals.size()), 0.01);

    Matrix beta = Matrix::Zero(k_max, 2);
    beta(0, 1) = 5.0;
    const ModelSpec alt(null_model.X, null_model.lambda, CoefficientBlock(beta, BasisMeta(k_max)));
    const DatasetSampler alt_sampler(alt);
    std::size_t power = 0;
    for (std::uint32_t r = 0; r < 200; ++r) power += test.evaluate(alt_sampler(12, r), false).reject ? 1 : 0;
    EXPECT_EQ(power, 200u);
}

TEST(LinearHypothesisTest, ScalingInvariance) {
    const std::size_t k_max = 4;
    const ModelSpec m = design_model(k_max);
    TestSpec a = slope_test(k_max);
    a.C = CoefficientBlock(Matrix::Constant(k_max, 1, 0.2), BasisMeta(k_max));
    TestSpec b = a;
    const double c = 3.0;
    std::vector<Matrix> scaled;
    for (const Matrix& k : a.K.mats()) scaled.push_back(c * k);
    b.K = SpectralMatrixOperator(scaled, BasisMeta(k_max));
    b.C = CoefficientBlock(c * a.C.data(), BasisMeta(k_max));
    const CoefficientBlock y = sample_dataset(m, 8);
    const TestResult ra = run_test(m, y, a), rb = run_test(m, y, b);
    EXPECT_NEAR(rb.statistic, c * c * ra.statistic, 1e-10 * rb.statistic);
    EXPECT_EQ(ra.reject, rb.reject);
    EXPECT_NEAR(ra.p_value, rb.p_value, 1e-8);
}

TEST(LinearHypothesisTest, PerLIndependence) {
    const std::size_t k_max = 3;
    const ModelSpec m = design_model(k_max);
    const LinearHypothesisTest test(m, slope_test(k_max));
    const DatasetSampler sampler(m);
    std::vector<double> a, b;
    const std::size_t n = 10000;
    for (std::uint32_t r = 0; r < n; ++r) {
        const TestResult res = test.evaluate(sampler(21, r), false);
        a.push_back(res.per_l[0]);
        b.push_back(res.per_l[2]);
    }
    EXPECT_LT(std::abs(correlation(a, b)), 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST(TestSpec, Validation) {
    const ModelSpec m = design_model(3);
    TestSpec t = slope_test(3);
    t.alpha = 1.0;
    EXPECT_THROW(LinearHypothesisTest(m, t), ValidationError);
    t = slope_test(3);
    t.C = CoefficientBlock::zeros(BasisMeta(3), 2);
    EXPECT_THROW(LinearHypothesisTest(m, t), DimensionError);
    t = slope_test(4);
    EXPECT_THROW(LinearHypothesisTest(m, t), BasisError);
    const ModelSpec flat = design_model(3, 0.0);
    EXPECT_THROW(LinearHypothesisTest(flat, slope_test(3)), DomainError);
}

TEST(TestResult, RankDeficientContrastOmitsPerL) {
    const ModelSpec m = design_model(2);
    TestSpec t;
    t.K = SpectralMatrixOperator::generate(BasisMeta(2), [](std::size_t) { return Matrix((Matrix(2, 2) << 1, 1, 2, 2).finished()); });
    t.C = CoefficientBlock::zeros(BasisMeta(2), 2);
    const TestResult r = run_test(m, sample_dataset(m, 1), t);
    EXPECT_TRUE(r.per_l.empty());
    EXPECT_FALSE(r.warnings.empty());
}
