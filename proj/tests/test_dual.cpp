#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <stable_resnet/dual.hpp>

#include "oracle.hpp"

using namespace sresnet;

TEST(Dual, FEndpoints)
{
    EXPECT_DOUBLE_EQ(relu_f(1.0), 0.0);
    EXPECT_NEAR(relu_f(0.0), 1.0 / std::numbers::pi, 1e-15);
    EXPECT_NEAR(relu_f(-1.0), 1.0, 1e-15);
}

TEST(Dual, FhatEndpoints)
{
    EXPECT_DOUBLE_EQ(relu_fhat(1.0), 1.0);
    EXPECT_NEAR(relu_fhat(0.0), 1.0 / std::numbers::pi, 1e-15);
    EXPECT_NEAR(relu_fhat(-1.0), 0.0, 1e-15);
}

TEST(Dual, FprimeValues)
{
    EXPECT_DOUBLE_EQ(relu_fprime(1.0), 0.0);
    EXPECT_NEAR(relu_fprime(-1.0), -1.0, 1e-15);
    EXPECT_NEAR(relu_fprime(0.0), -0.5, 1e-15);
}

TEST(Dual, ClampAndDomain)
{
    EXPECT_DOUBLE_EQ(relu_fhat(1.0 + 5e-13), 1.0);
    EXPECT_NEAR(relu_f(-1.0 - 5e-13), 1.0, 1e-12);
    EXPECT_THROW(relu_f(1.0 + 1e-9), DomainError);
    EXPECT_THROW(relu_fhat(-1.1), DomainError);
    EXPECT_THROW(relu_fprime(std::nan("")), DomainError);
}

TEST(Dual, FhatIsTwiceTheReluMoment)
{
    for (double g : {-0.95, -0.5, 0.0, 0.3, 0.77, 0.99})
        EXPECT_NEAR(relu_fhat(g), 2.0 * oracle::relu_moment(g), 1e-8) << g;
}

TEST(Dual, FhatMonotoneAndAboveIdentity)
{
    double prev = relu_fhat(-1.0);
    for (int i = 1; i <= 1000; ++i) {
        const double g = -1.0 + 2.0 * i / 1000.0;
        const double v = relu_fhat(g);
        EXPECT_GE(v, prev);
        if (g <= 1.0 - 1e-9)
            EXPECT_GT(v, g) << g;
        prev = v;
    }
}

TEST(Dual, DerivativeMatchesFiniteDifferences)
{
    const double h = 1e-6;
    for (int i = 0; i <= 198; ++i) {
        const double g = -0.99 + 0.01 * i;
        const double fd = (relu_fhat(g + h) - relu_fhat(g - h)) / (2 * h);
        EXPECT_NEAR(relu_fhat_prime(g), fd, 1e-6) << g;
        EXPECT_NEAR(relu_fhat_prime(g), 1.0 + relu_fprime(g), 1e-15);
        const double fd2 = (relu_f(g + h) - relu_f(g - h)) / (2 * h);
        EXPECT_NEAR(relu_fprime(g), fd2, 1e-6) << g;
    }
}

TEST(Taylor, LowOrder)
{
    const TaylorSeries s = fhat_taylor(1);
    ASSERT_EQ(s.coefficients.size(), 2u);
    EXPECT_NEAR(s.coefficients[0], 1.0 / std::numbers::pi, 1e-12);
    EXPECT_EQ(s.coefficients[1], 0.5);
    EXPECT_EQ(fhat_taylor(0).coefficients.size(), 1u);
    EXPECT_THROW(fhat_taylor(-1), ContractError);
}

TEST(Taylor, SecondCoefficientMatchesFiniteDifference)
{
    const double h = 1e-4;
    const double fd = (relu_fhat(h) - 2.0 * relu_fhat(0.0) + relu_fhat(-h)) / (h * h);
    const TaylorSeries s = fhat_taylor(4);
    EXPECT_NEAR(s.coefficients[2], fd / 2.0, 1e-7);
    EXPECT_NEAR(s.coefficients[2], 1.0 / (2.0 * std::numbers::pi), 1e-15);
    EXPECT_NEAR(s.coefficients[4], 1.0 / (24.0 * std::numbers::pi), 1e-15);
    EXPECT_EQ(s.coefficients[3], 0.0);
}

TEST(Taylor, FourthCoefficientMatchesArcsinSeries)
{
    // fhat'' = 1/(pi sqrt(1-g^2)) = (1/pi) sum binom(2n,n) g^{2n} / 4^n
    const TaylorSeries s = fhat_taylor(60);
    double central = 1.0;
    for (int n = 0; 2 * n + 2 <= 60; ++n) {
        if (n > 0)
            central *= (2.0 * n) * (2.0 * n - 1.0) / (n * n * 4.0);
        const double expect = central / std::numbers::pi / ((2.0 * n + 1) * (2.0 * n + 2));
        EXPECT_NEAR(s.coefficients[2 * n + 2], expect, 1e-15 + 1e-12 * expect) << n;
    }
}

TEST(Taylor, SignPattern)
{
    const TaylorSeries s = fhat_taylor(60);
    for (int n = 0; n <= 60; ++n) {
        if (n % 2 == 1 && n >= 3)
            EXPECT_EQ(s.coefficients[n], 0.0) << n;
        if (n % 2 == 0)
            EXPECT_GT(s.coefficients[n], 0.0) << n;
    }
}

TEST(Taylor, PartialSumsAtOneIncreaseToOne)
{
    const TaylorSeries s = fhat_taylor(60);
    double acc = 0.0, prev = -1.0;
    for (double a : s.coefficients) {
        acc += a;
        EXPECT_GE(acc, prev);
        EXPECT_LE(acc, 1.0 + 1e-15);
        prev = acc;
    }
}

// Coefficients are non-negative, so the truncation error peaks at |g| = 1 where
// it equals the missing mass 1 - sum a_n; that mass decays like n^{-3/2}.
TEST(Taylor, SeriesErrorBoundedByTailMass)
{
    for (int order : {60, 2000}) {
        const TaylorSeries s = fhat_taylor(order);
        double mass = 0.0;
        for (double a : s.coefficients)
            mass += a;
        const double tail = 1.0 - mass;
        double worst = 0.0;
        for (int i = 0; i <= 1000; ++i) {
            const double g = -1.0 + 2.0 * i / 1000.0;
            worst = std::max(worst, std::abs(s(g) - relu_fhat(g)));
        }
        EXPECT_LE(worst, tail + 1e-13) << order;
        EXPECT_NEAR(worst, tail, 1e-12) << order;
    }
}

TEST(Taylor, TailMassAtSixtyTerms)
{
    const TaylorSeries s = fhat_taylor(60);
    double mass = 0.0;
    for (double a : s.coefficients)
        mass += a;
    EXPECT_NEAR(1.0 - mass, 1.8077488468581926e-4, 1e-13);
}

TEST(Taylor, MicroAccuracyNeedsOrder2000)
{
    const TaylorSeries s = fhat_taylor(2000);
    double worst = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double g = -1.0 + 2.0 * i / 1000.0;
        worst = std::max(worst, std::abs(s(g) - relu_fhat(g)));
    }
    EXPECT_LE(worst, 1e-6);
}
