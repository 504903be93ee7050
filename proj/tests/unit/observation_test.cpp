#include "occtrack/observation.hpp"
#include "support/oracles.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace occtrack;

namespace
{
using oracle::gauss;
using oracle::integrate;
using oracle::normal_cdf;
using oracle::occluded_by_quadrature;

ObservationParams no_tail()
{
    ObservationParams p;
    p.beta = 0.0;
    return p;
}
}  // namespace

TEST(Observation, LambdaFromHalfLife)
{
    EXPECT_DOUBLE_EQ(lambda_from_half_life(1.0), std::numbers::ln2);
    EXPECT_DOUBLE_EQ(lambda_from_half_life(2.0), std::numbers::ln2 / 2.0);
    EXPECT_DOUBLE_EQ(std::exp(-lambda_from_half_life(0.7) * 0.7), 0.5);
    EXPECT_THROW(lambda_from_half_life(0.0), std::invalid_argument);
}

TEST(Observation, SigmaCGrowsWithDepthSquared)
{
    const ObservationParams p;
    EXPECT_DOUBLE_EQ(sigma_c(1.0, p), 0.0015);
    EXPECT_DOUBLE_EQ(sigma_c(2.0, p), 0.006);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (int k = 0; k < 100; ++k)
    {
        const double d = u(rng);
        EXPECT_NEAR(sigma_c(2.0 * d, p), 4.0 * sigma_c(d, p), 1e-15);
    }
}

TEST(Observation, VisiblePeakValues)
{
    // sigma_eff = 0.01 with the camera noise switched almost off.
    ObservationParams p;
    p.k_c = 1e-300;
    p.sigma_m = 0.01;
    p.beta = 0.0;
    EXPECT_NEAR(lik_visible(1.0, 1.0, p), 1.0 / (std::sqrt(2.0 * std::numbers::pi) * 0.01), 1e-10);
    EXPECT_NEAR(lik_visible(1.0, 1.0, p), 39.894, 1e-3);
    p.beta = 0.01;
    EXPECT_NEAR(lik_visible(1.0, 1.0, p), 0.99 * 39.894228 + 0.01 / 6.0, 1e-5);
    EXPECT_NEAR(lik_visible(1.0, 1.0, p), 39.497, 1e-3);
}

TEST(Observation, VisibleCombinesVariances)
{
    ObservationParams p = no_tail();
    const double d = 1.7, z = 1.703;
    const double s = std::hypot(sigma_c(d, p), p.sigma_m);
    EXPECT_NEAR(lik_visible(z, d, p), gauss(z, d, s), 1e-12);
}

TEST(Observation, RejectsInvalidMeasurements)
{
    const ObservationParams p;
    EXPECT_THROW(lik_visible(0.0, 1.0, p), std::invalid_argument);
    EXPECT_THROW(lik_visible(6.5, 1.0, p), std::invalid_argument);
    EXPECT_THROW(lik_visible(std::nan(""), 1.0, p), std::invalid_argument);
    EXPECT_THROW(lik_occluded(1.0, 0.0, p), std::invalid_argument);
    EXPECT_THROW(pixel_marginal(1.0, 1.0, 1.5, p), std::invalid_argument);
    EXPECT_NO_THROW(lik_visible(6.0, 1.0, p));
}

TEST(Observation, OccludedBehindObjectIsTailOnly)
{
    ObservationParams p;
    p.k_c = 0.002;  // sigma_c(1) = 0.002
    EXPECT_NEAR(lik_occluded(2.0, 1.0, p), 0.01 / 6.0, 1e-12);
    EXPECT_NEAR(occluded_by_quadrature(2.0, 1.0, p) * 0.99 + 0.01 / 6.0, 0.01 / 6.0, 1e-12);
}

TEST(Observation, OccludedMatchesQuadrature)
{
    const ObservationParams p = no_tail();
    const double z = 0.5, d = 1.0;
    const double ref = occluded_by_quadrature(z, d, p);
    EXPECT_NEAR(lik_occluded(z, d, p) / ref, 1.0, 1e-6);
}

TEST(Observation, OccludedClosedFormAcrossGrid)
{
    const ObservationParams p = no_tail();
    for (double d : {0.3, 1.0, 3.0})
    {
        const double s = sigma_c(d, p);
        std::vector<double> zs;
        for (int k = 1; k <= 60; ++k) zs.push_back(6.0 * k / 60.0);
        for (int k = -12; k <= 12; ++k) zs.push_back(d + 0.5 * k * s);
        zs.push_back(1e-4);
        for (double z : zs)
        {
            if (z <= 0.0 || z > 6.0) continue;
            const double closed = lik_occluded(z, d, p);
            const double ref = occluded_by_quadrature(z, d, p);
            if (ref < 1e-280)
            {
                EXPECT_LT(closed, 1e-280);
                continue;
            }
            EXPECT_NEAR(closed / ref, 1.0, 1e-6) << "d=" << d << " z=" << z;
        }
    }
}

TEST(Observation, SmallLambdaUsesUniformLimit)
{
    ObservationParams p = no_tail();
    p.lambda = 1e-10;
    const double d = 1.0, z = 0.4;
    // Uniform occluder on (0, d): density (Phi((d - z)/s) - Phi(-z/s)) / d.
    const double s = sigma_c(d, p);
    EXPECT_NEAR(lik_occluded(z, d, p), (normal_cdf((d - z) / s) - normal_cdf(-z / s)) / d, 1e-8);
}

TEST(Observation, BranchesNormalize)
{
    const ObservationParams p;
    for (double d : {0.3, 1.0, 3.0})
    {
        const double s = std::hypot(sigma_c(d, p), p.sigma_m);
        std::vector<double> breaks;
        for (double k : {-40.0, -10.0, -3.0, 0.0, 3.0, 10.0, 40.0}) breaks.push_back(d + k * s);
        const double vis = integrate([&](double z) { return lik_visible(z, d, p); }, 1e-12, p.max_range, breaks);
        EXPECT_NEAR(vis, 1.0, 1e-3) << d;
    }
}

TEST(Observation, OccludedMassBelowZeroIsTheOnlyDeficit)
{
    const ObservationParams p;
    for (double d : {0.3, 1.0, 3.0})
    {
        const double s = sigma_c(d, p);
        std::vector<double> breaks;
        for (double k : {1.0, 3.0, 10.0, 40.0}) breaks.push_back(k * s);
        for (double k : {-40.0, -10.0, -3.0, 0.0, 3.0, 10.0, 40.0}) breaks.push_back(d + k * s);
        const double occ = integrate([&](double z) { return lik_occluded(z, d, p); }, 1e-12, p.max_range, breaks);
        // Gaussian mass of occluders near the lens that lands at z <= 0.
        const double norm = p.lambda / (1.0 - std::exp(-p.lambda * d));
        const double leak = (1.0 - p.beta) *
                            integrate([&](double b) { return norm * std::exp(-p.lambda * b) * normal_cdf(-b / s); }, 0.0,
                                      d, {s, 3.0 * s, 10.0 * s, 40.0 * s});
        EXPECT_NEAR(occ, 1.0 - leak, 1e-7) << d;
        if (d <= 1.0)
        {
            EXPECT_NEAR(occ, 1.0, 1e-3) << d;
        }
    }
}

TEST(Observation, DensitiesNonNegativeAndFinite)
{
    const ObservationParams p;
    for (double d : {0.05, 0.3, 1.0, 3.0, 5.9})
        for (int k = 1; k <= 600; ++k)
        {
            const double z = 6.0 * k / 600.0;
            for (double pv : {0.0, 0.3, 1.0})
            {
                const double v = pixel_marginal(z, d, pv, p);
                EXPECT_TRUE(std::isfinite(v) && v >= 0.0);
            }
        }
}

TEST(Observation, OccluderMassBehindObjectIsGaussianTail)
{
    // Past the object only the camera-noise tail of the nearest occluders
    // remains. It is below 1e-9 from seven standard deviations on; at five
    // it is the Gaussian tail of an occluder at b = d.
    const ObservationParams p;
    const double tail = p.beta / p.max_range;
    for (double d : {0.3, 1.0, 3.0})
    {
        const double s = sigma_c(d, p);
        for (double k = 7.0; k < 200.0; k *= 1.3)
        {
            const double z = d + k * s;
            if (z > p.max_range) break;
            EXPECT_LE(lik_occluded(z, d, p), tail + 1e-9) << d << " " << k;
        }
        const double z5 = d + 5.0 * s;
        const double excess = lik_occluded(z5, d, p) - tail;
        const double ref = (1.0 - p.beta) * occluded_by_quadrature(z5, d, p);
        EXPECT_NEAR(excess / ref, 1.0, 1e-6);
        const double density_at_d = p.lambda * std::exp(-p.lambda * d) / -std::expm1(-p.lambda * d);
        EXPECT_LT(excess, (1.0 - p.beta) * density_at_d * s * gauss(5.0, 0.0, 1.0) / 5.0 / s * 1.01);
    }
}

TEST(Observation, MarginalEndpointsAndMissedRays)
{
    const ObservationParams p;
    EXPECT_EQ(pixel_marginal(0.9, 1.0, 1.0, p), lik_visible(0.9, 1.0, p));
    EXPECT_EQ(pixel_marginal(0.9, 1.0, 0.0, p), lik_occluded(0.9, 1.0, p));
    EXPECT_EQ(pixel_marginal(0.9, std::nullopt, 0.4, p), 1.0 / 6.0);
}

TEST(Observation, MarginalShapeAtOneMeter)
{
    const ObservationParams p;
    const double d = 1.0;
    const std::vector<double> pvis{0.001, 0.1, 0.5, 0.9, 0.999};

    // Spike at the predicted depth grows with the visibility probability.
    for (std::size_t k = 1; k < pvis.size(); ++k)
        EXPECT_GT(pixel_marginal(d, d, pvis[k], p), pixel_marginal(d, d, pvis[k - 1], p));
    EXPECT_GT(pixel_marginal(d, d, 0.999, p), 100.0 * pixel_marginal(0.5, d, 0.999, p));

    // In front of the object the density falls as visibility rises.
    const double s = std::hypot(sigma_c(d, p), p.sigma_m);
    std::vector<double> front;
    for (int k = 1; k <= 95; ++k)
        if (0.01 * k < d - 8.0 * s) front.push_back(0.01 * k);
    for (double z : front)
        for (std::size_t k = 1; k < pvis.size(); ++k)
            EXPECT_LT(pixel_marginal(z, d, pvis[k], p), pixel_marginal(z, d, pvis[k - 1], p)) << z;

    // Almost surely occluded: smooth in front, collapsing right behind.
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double z : front)
    {
        const double v = pixel_marginal(z, d, pvis.front(), p);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    EXPECT_LT(hi / lo, 2.5);
    for (std::size_t k = 1; k < front.size(); ++k)
        EXPECT_LT(std::abs(pixel_marginal(front[k], d, 0.001, p) / pixel_marginal(front[k - 1], d, 0.001, p) - 1.0),
                  0.02);
    const double behind = pixel_marginal(d + 10.0 * s, d, pvis.front(), p);
    EXPECT_LT(behind, 0.01 * lo);

    // Mostly visible: the density in front is pushed down to near the tail.
    EXPECT_LT(pixel_marginal(0.5, d, 0.9, p), 0.2 * pixel_marginal(0.5, d, 0.1, p));
}

TEST(Observation, SamplerDegenerateAndRange)
{
    ObservationParams p;
    p.beta = 0.0;
    p.k_c = 0.0;
    std::mt19937_64 rng(3);
    EXPECT_EQ(sample_measurement(1.3, p, rng), 1.3);
    EXPECT_THROW(sample_measurement(7.0, p, rng), std::invalid_argument);
    p = ObservationParams{};
    for (int k = 0; k < 10000; ++k)
    {
        const double z = sample_measurement(5.99, p, rng);
        EXPECT_TRUE(z > 0.0 && z <= 6.0);
    }
}

TEST(Observation, SamplerMixtureMean)
{
    const ObservationParams p;
    std::mt19937_64 rng(4);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < n; ++k)
    {
        const double z = sample_measurement(1.0, p, rng);
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    EXPECT_NEAR(mean, 0.99 * 1.0 + 0.01 * 3.0, 3.0 * sd / std::sqrt(double(n)));
}

TEST(Observation, SamplerMatchesVisibleDensity)
{
    ObservationParams p;
    p.sigma_m = 0.0;
    const double b = 1.0, s = sigma_c(b, p);
    std::vector<double> edges{0.0};
    for (int k = -20; k <= 20; ++k) edges.push_back(b + 0.2 * k * s);
    for (int k = 1; k <= 10; ++k) edges.push_back(b + 4.0 * s + k * (6.0 - b - 4.0 * s) / 10.0);
    std::sort(edges.begin(), edges.end());
    // Splice a few uniform bins in front of the surface as well.
    for (int k = 1; k < 10; ++k) edges.push_back(k * (b - 4.0 * s) / 10.0);
    std::sort(edges.begin(), edges.end());

    auto cdf = [&](double z) {
        return (1.0 - p.beta) * normal_cdf((z - b) / s) + p.beta * std::clamp(z / p.max_range, 0.0, 1.0);
    };
    const int n = 1000000;
    std::vector<long> counts(edges.size() - 1, 0);
    std::mt19937_64 rng(5);
    for (int k = 0; k < n; ++k)
    {
        const double z = sample_measurement(b, p, rng);
        const auto it = std::upper_bound(edges.begin(), edges.end(), z);
        const std::size_t bin = std::min<std::size_t>(std::distance(edges.begin(), it) - 1, counts.size() - 1);
        ++counts[bin];
    }
    double chi2 = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k)
    {
        const double expected = n * (cdf(edges[k + 1]) - cdf(edges[k]));
        ASSERT_GT(expected, 5.0);
        chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
    }
    const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
    EXPECT_LT(chi2, boost::math::quantile(dist, 0.99));
}
