#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "varcontrib/model.hpp"

using namespace varcontrib;

TEST(BetaFromMoments, HighAndLowVarianceShapes) {
    const BetaParams u_shaped = beta_from_moments(0.5, 0.125);
    EXPECT_NEAR(u_shaped.alpha, 0.5, 1e-14);
    EXPECT_NEAR(u_shaped.beta, 0.5, 1e-14);
    const BetaParams bell = beta_from_moments(0.5, 0.03125);
    EXPECT_NEAR(bell.alpha, 3.5, 1e-13);
    EXPECT_NEAR(bell.beta, 3.5, 1e-13);
}

TEST(BetaFromMoments, RecoversMoments) {
    for (double mean : {0.05, 0.3, 0.5, 0.9}) {
        for (double fraction : {0.01, 0.4, 0.95}) {
            const double variance = fraction * mean * (1.0 - mean);
            const BetaParams p = beta_from_moments(mean, variance);
            EXPECT_NEAR(p.mean(), mean, 1e-13);
            EXPECT_NEAR(p.variance(), variance, 1e-13);
        }
    }
}

TEST(BetaFromMoments, RejectsInfeasibleMoments) {
    EXPECT_THROW(beta_from_moments(0.0, 0.01), ValidationError);
    EXPECT_THROW(beta_from_moments(1.0, 0.01), ValidationError);
    EXPECT_THROW(beta_from_moments(0.5, 0.0), ValidationError);
    try {
        beta_from_moments(0.5, 0.3);
        FAIL() << "expected a ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("mean*(1-mean)"), std::string::npos);
    }
}

TEST(DefaultThreshold, InverseNormalOfPd) {
    EXPECT_NEAR(default_threshold(0.02), -2.0537489106318230, 1e-14);
    EXPECT_THROW(default_threshold(0.0), ValidationError);
    EXPECT_THROW(default_threshold(1.0), ValidationError);
}

TEST(StandaloneVar, BenchmarkProfileValues) {
    // Closed form: v * BetaQuantile((alpha - 1 + pd) / pd), evaluated with mpmath.
    const std::vector<double> expected{24.846104, 19.77757, 4.969221, 3.955514, 0.993844, 0.791103,
                                       22.612712, 16.509639, 4.522542, 3.301928, 0.904508, 0.660386};
    const auto profile = benchmark_sector_profile();
    ASSERT_EQ(profile.size(), 24u);
    for (std::size_t row = 0; row < profile.size(); ++row) {
        EXPECT_NEAR(standalone_var(profile[row], 0.999), expected[row / 2], 2e-6) << "row " << row + 1;
    }
}

TEST(StandaloneVar, ZeroInsideNoDefaultAtom) {
    const AssetSpec a{1, 0, 0.02, 25.0, 0.5, 0.125};
    EXPECT_EQ(standalone_var(a, 0.98), 0.0);
    EXPECT_EQ(standalone_var(a, 0.5), 0.0);
    EXPECT_GT(standalone_var(a, 0.9801), 0.0);
}

TEST(StandaloneVar, IncreasesInConfidence) {
    const AssetSpec a{1, 0, 0.02, 25.0, 0.5, 0.03125};
    double previous = 0.0;
    for (double alpha = 0.981; alpha < 0.9999; alpha += 0.001) {
        const double v = standalone_var(a, alpha);
        EXPECT_GE(v, previous);
        EXPECT_LE(v, a.exposure);
        previous = v;
    }
}

TEST(FactorModel, RejectsBadInputs) {
    EXPECT_THROW(FactorModel(benchmark_correlation(), 1.0), ValidationError);
    EXPECT_THROW(FactorModel(benchmark_correlation(), -0.1), ValidationError);
    Matrix not_pd(2, 2);
    not_pd << 1.0, 1.2, 1.2, 1.0;
    EXPECT_THROW(FactorModel(not_pd, 0.18), DecompositionError);
    Matrix asymmetric(2, 2);
    asymmetric << 1.0, 0.2, 0.3, 1.0;
    EXPECT_THROW(FactorModel(asymmetric, 0.18), ValidationError);
}

TEST(FactorModel, LatentCorrelation) {
    const FactorModel f(benchmark_correlation(), 0.18);
    EXPECT_DOUBLE_EQ(f.latent_correlation(0, 0), 0.18);
    EXPECT_DOUBLE_EQ(f.latent_correlation(0, 1), 0.18 * 0.75);
    EXPECT_DOUBLE_EQ(f.latent_correlation(2, 3), 0.18 * 0.25);
}

TEST(FactorModel, CholeskyReproducesCorrelation) {
    const FactorModel f(benchmark_correlation(), 0.18);
    EXPECT_LT((f.chol() * f.chol().transpose() - benchmark_correlation()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Portfolio, BenchmarkShape) {
    const Portfolio p = benchmark_portfolio();
    EXPECT_EQ(p.size(), 96u);
    EXPECT_EQ(p.factor_count(), 4);
    EXPECT_DOUBLE_EQ(p.factors().loading(), 0.18);
    EXPECT_EQ(p.asset(0).id, 1);
    EXPECT_EQ(p.asset(95).id, 96);
    EXPECT_EQ(p.asset(24).sector, 1);
    EXPECT_EQ(p.position_in_sector(24), 1);
    EXPECT_EQ(p.position_in_sector(95), 24);
    EXPECT_TRUE(validate_portfolio(p).empty());
}

TEST(Portfolio, ValidationListsEveryViolation) {
    const FactorModel f(benchmark_correlation(), 0.18);
    std::vector<AssetSpec> assets{{1, 0, 0.02, 25, 0.5, 0.125}, {2, 1, 1.5, 25, 0.5, 0.125},
                                  {3, 2, 0.02, -1, 0.5, 0.125}, {4, 7, 0.02, 25, 0.5, 0.3}};
    const ValidationReport report = validate_portfolio(assets, f);
    // pd, exposure, sector range, variance bound, and sector 4 empty.
    EXPECT_EQ(report.size(), 5u);
    EXPECT_THROW(Portfolio(assets, f), ValidationError);
}

TEST(Portfolio, CertainDefaultHasInfiniteThreshold) {
    Matrix one(1, 1);
    one << 1.0;
    const Portfolio p({{1, 0, 1.0, 10.0, 0.4, 0.01}}, FactorModel(one, 0.2));
    EXPECT_EQ(p.threshold(0), std::numeric_limits<double>::infinity());
}
