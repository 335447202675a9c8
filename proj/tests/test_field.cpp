// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/field.h>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace nmf {
namespace {

GridShape smallShape(int res, int densityRank = 1, int featureRank = 1, int featureDim = 1) {
    GridShape s;
    s.resolution = {res, res, res};
    s.densityRank = densityRank;
    s.featureRank = featureRank;
    s.featureDim = featureDim;
    return s;
}

// World position of lattice point (i, j, k).
Vec3d latticePoint(const FactorGrid& g, int i, int j, int k) {
    const Vec3d s = g.spacing();
    const Aabb& b = g.bounds();
    return {b.lo.x + i * s.x, b.lo.y + j * s.y, b.lo.z + k * s.z};
}

// raw(p) = c * z through mode 0 (plane over xy, line along z).
FactorGrid zRamp(int res, double c) {
    FactorGrid g(smallShape(res));
    std::fill(g.densityPlanes[0].begin(), g.densityPlanes[0].end(), 1.0);
    for (int k = 0; k < res; ++k) g.densityLines[0][k] = c * latticePoint(g, 0, 0, k).z;
    return g;
}

TEST(FieldDensity, ZeroFactorsGiveLogTwo) {
    const FactorGrid g(smallShape(8));
    EXPECT_NEAR(g.density({0.1, -0.2, 0.3}), std::log(2.0), 1e-12);
    EXPECT_NEAR(g.density({0.7, 0.7, -0.9}), 0.6931471805599453, 1e-12);
}

TEST(FieldDensity, OutsideBoundsIsZero) {
    const FactorGrid g = FactorGrid::random(smallShape(8, 4, 4, 3), 3);
    EXPECT_EQ(g.density({2.0, 0.0, 0.0}), 0.0);
    EXPECT_EQ(g.density({0.0, 0.0, -1.6}), 0.0);
}

TEST(FieldDensity, RankOneValueAtVoxelCenter) {
    FactorGrid g(smallShape(8));
    const int i = 3, j = 5, k = 2;
    const int resB = 8;
    g.densityPlanes[0][static_cast<size_t>(i) * resB + j] = 2.5;
    g.densityLines[0][k] = 4.0;
    const double expected = std::log1p(std::exp(10.0));  // softplus(10)
    EXPECT_NEAR(expected, 10.0000453989, 1e-9);
    EXPECT_NEAR(g.density(latticePoint(g, i, j, k)), expected, 1e-9);
}

TEST(FieldFeature, ZeroAndOutside) {
    const FactorGrid zero(smallShape(8, 1, 2, 5));
    for (double v : zero.feature({0.2, 0.1, 0.0})) EXPECT_EQ(v, 0.0);
    const FactorGrid g = FactorGrid::random(smallShape(8, 1, 2, 5), 11);
    for (double v : g.feature({0.0, 3.0, 0.0})) EXPECT_EQ(v, 0.0);
}

TEST(FieldFeature, SeparableRankOneReproducedAtLatticePoints) {
    const int res = 9;
    FactorGrid g(smallShape(res, 1, 1, 1));
    auto u = [](double x) { return 1.0 + 0.5 * x; };
    auto v = [](double y) { return std::cos(y); };
    auto w = [](double z) { return 2.0 - z * z; };
    for (int i = 0; i < res; ++i)
        for (int j = 0; j < res; ++j) {
            const Vec3d p = latticePoint(g, i, j, 0);
            g.featurePlanes[0][static_cast<size_t>(i) * res + j] = u(p.x) * v(p.y);
        }
    for (int k = 0; k < res; ++k) g.featureLines[0][k] = w(latticePoint(g, 0, 0, k).z);
    g.basis = {1.0, 0.0, 0.0};
    for (int i = 0; i < res; i += 2)
        for (int j = 1; j < res; j += 3)
            for (int k = 0; k < res; k += 4) {
                const Vec3d p = latticePoint(g, i, j, k);
                const double expected = u(p.x) * v(p.y) * w(p.z);
                EXPECT_NEAR(g.feature(p)[0], expected, 1e-6 * std::abs(expected)) << i << j << k;
            }
}

TEST(FieldNormals, RampPointsDownTheGradient) {
    const FactorGrid g = zRamp(16, 3.0);
    for (const Vec3d p : {Vec3d{0.1, 0.2, 0.3}, Vec3d{-0.5, 0.4, -0.2}, Vec3d{0.0, 0.0, 0.0}}) {
        const NormalResult r = g.normalAt(p);
        ASSERT_TRUE(r.valid);
        EXPECT_NEAR(r.normal.x, 0.0, 1e-9);
        EXPECT_NEAR(r.normal.y, 0.0, 1e-9);
        EXPECT_NEAR(r.normal.z, -1.0, 1e-9);
    }
}

TEST(FieldNormals, ConstantFieldIsZeroFlagged) {
    const FactorGrid g(smallShape(8));
    EXPECT_FALSE(g.normalAt({0.1, 0.1, 0.1}).valid);
}

TEST(FieldNormals, OutsideThrows) { EXPECT_THROW(FactorGrid(smallShape(8)).normalAt({5.0, 0.0, 0.0}), Error); }

TEST(FieldNormals, GaussianBlobIsRadialAtOneSigma) {
    // raw = A gx(x) gy(y) gz(z) is separable (rank one) and softplus is
    // monotone, so -grad(sigma) points along the outward radius.
    const int res = 64;
    const double sigma = 0.4, amp = 8.0;
    FactorGrid g(smallShape(res));
    auto gauss = [&](double t) { return std::exp(-0.5 * t * t / (sigma * sigma)); };
    for (int i = 0; i < res; ++i)
        for (int j = 0; j < res; ++j) {
            const Vec3d p = latticePoint(g, i, j, 0);
            g.densityPlanes[0][static_cast<size_t>(i) * res + j] = amp * gauss(p.x) * gauss(p.y);
        }
    for (int k = 0; k < res; ++k) g.densityLines[0][k] = gauss(latticePoint(g, 0, 0, k).z);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const Vec3d dir = normalize(Vec3d{nd(rng), nd(rng), nd(rng)});
        const NormalResult r = g.normalAt(dir * sigma);
        ASSERT_TRUE(r.valid);
        worst = std::max(worst, std::acos(std::clamp(dot(r.normal, dir), -1.0, 1.0)) * 180.0 / kPi);
    }
    EXPECT_LT(worst, 2.0);
}

TEST(FieldUpsample, SameResolutionIsIdentity) {
    const FactorGrid g = FactorGrid::random(smallShape(10, 3, 2, 4), 17);
    const FactorGrid u = g.upsampled({10, 10, 10});
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ud(-1.5, 1.5);
    for (int t = 0; t < 100; ++t) {
        const Vec3d p{ud(rng), ud(rng), ud(rng)};
        EXPECT_EQ(g.density(p), u.density(p));
        EXPECT_EQ(g.feature(p), u.feature(p));
    }
}

TEST(FieldUpsample, ScheduledResolutions) {
    // round(32 + 268 k / 7); k = 2 gives 108.57, which rounds to 109.
    const std::vector<int> expected{70, 109, 147, 185, 223, 262, 300};
    for (int k = 1; k <= 7; ++k) {
        EXPECT_EQ(scheduledResolution(32, 300, k, 7), static_cast<int>(std::lround(32 + 268.0 * k / 7)));
        EXPECT_EQ(scheduledResolution(32, 300, k, 7), expected[k - 1]);
    }
}

TEST(FieldUpsample, RampIsReproduced) {
    const FactorGrid g = zRamp(16, 1.7);
    const FactorGrid u = g.upsampled({32, 32, 32});
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> ud(-1.5, 1.5);
    double worst = 0.0;
    for (int t = 0; t < 2000; ++t) {
        const Vec3d p{ud(rng), ud(rng), ud(rng)};
        worst = std::max(worst, std::abs(g.density(p) - u.density(p)));
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(FieldUpsample, DownsamplingThrows) {
    const FactorGrid g(smallShape(16));
    EXPECT_THROW(g.upsampled({8, 16, 16}), Error);
}

}  // namespace
}  // namespace nmf
