// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/optim.h>

#include <gtest/gtest.h>

#include "support/micro_scene.h"

#include <cmath>
#include <random>

namespace nmf {
namespace {

TEST(Schedule, MultiplierExamples) {
    EXPECT_NEAR(lrMultiplier(0), 0.1, 1e-12);
    EXPECT_NEAR(lrMultiplier(100), 0.97724, 1e-5);
    EXPECT_NEAR(lrMultiplier(100), std::pow(10.0, -3.0 * 100 / 30000), 1e-12);
    EXPECT_NEAR(lrMultiplier(30000), 1e-3, 1e-9);
}

TEST(Schedule, ContinuousAndMonotoneAfterWarmup) {
    double prev = lrMultiplier(0);
    for (int i = 1; i <= 30000; ++i) {
        const double m = lrMultiplier(i);
        EXPECT_LT(std::abs(m - prev), 0.03) << i;
        if (i > 100) {
            EXPECT_LT(m, prev) << i;
        }
        prev = m;
    }
}

TEST(Schedule, ScalingKeepsMultipliers) {
    const Schedule s = Schedule::scaled(0.1);
    EXPECT_EQ(s.warmupSteps, 10);
    EXPECT_EQ(s.totalSteps, 3000);
    EXPECT_EQ(s.upsampleSteps, (std::vector<int>{50, 100, 200, 300, 400, 550, 700}));
    EXPECT_NEAR(lrMultiplier(0, s), 0.1, 1e-12);
    EXPECT_NEAR(lrMultiplier(3000, s), 1e-3, 1e-9);
    EXPECT_THROW(Schedule::scaled(0.0), Error);
}

TEST(OrientationLoss, Examples) {
    const Vec3d wo{0.0, 0.0, 1.0};
    const std::vector<double> w{0.5};
    EXPECT_EQ(orientationLoss(w, std::vector<Vec3d>{{0.0, 0.0, 1.0}}, wo), 0.0);
    EXPECT_DOUBLE_EQ(orientationLoss(w, std::vector<Vec3d>{{0.0, 0.0, -1.0}}, wo), 0.5);
    const std::vector<double> zero{0.0, 0.0};
    EXPECT_EQ(orientationLoss(zero, std::vector<Vec3d>{{0.0, 0.0, -1.0}, {1.0, 0.0, 0.0}}, wo), 0.0);
    EXPECT_THROW(orientationLoss(w, std::vector<Vec3d>{}, wo), Error);
}

TEST(OrientationLoss, ZeroWhenEverythingFacesTheViewer) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        const Vec3d wo = normalize(Vec3d{nd(rng), nd(rng), nd(rng)});
        std::vector<double> w;
        std::vector<Vec3d> n;
        for (int j = 0; j < 8; ++j) {
            Vec3d v = normalize(Vec3d{nd(rng), nd(rng), nd(rng)});
            if (dot(v, wo) < 0.0) v = v * -1.0;
            n.push_back(v);
            w.push_back(ud(rng));
        }
        EXPECT_EQ(orientationLoss(w, n, wo), 0.0);
    }
}

TEST(PhotometricLoss, Examples) {
    Image a(4, 3), b(4, 3);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> ud(0.0f, 0.9f);
    for (float& v : a.data) v = ud(rng);
    EXPECT_EQ(photometricLoss(a, a), 0.0);
    for (size_t i = 0; i < a.data.size(); ++i) b.data[i] = a.data[i] + 0.1f;
    EXPECT_NEAR(photometricLoss(a, b), 0.01, 1e-6);
    for (float& v : b.data) v = ud(rng);
    double naive = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) naive += (double(a.data[i]) - b.data[i]) * (double(a.data[i]) - b.data[i]);
    EXPECT_NEAR(photometricLoss(a, b), naive / a.data.size(), 1e-7);
    EXPECT_THROW(photometricLoss(a, Image(3, 4)), Error);
}

ParamList single(std::vector<double>& v, ParamGroup g = ParamGroup::Network) { return {{"p", g, v}}; }

TEST(Adam, ZeroGradientLeavesParameters) {
    std::vector<double> p{1.0, -2.0, 3.0}, g{0.0, 0.0, 0.0};
    Adam adam;
    for (int i = 0; i < 5; ++i) adam.step(single(p), single(g), 1.0);
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
    EXPECT_EQ(adam.steps(), 5);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    std::vector<double> p{1.0, 1.0, 1.0}, g{0.3, -7.0, 1e-5};
    AdamConfig cfg;
    Adam adam(cfg);
    adam.step(single(p, ParamGroup::Grid), single(g), 0.5);
    const double lr = cfg.lrGrid * 0.5;
    EXPECT_NEAR(p[0], 1.0 - lr, 1e-12);
    EXPECT_NEAR(p[1], 1.0 + lr, 1e-12);
    EXPECT_NEAR(p[2], 1.0 - lr, 1e-9);
}

TEST(Adam, ConstantGradientGivesUnitSteps) {
    std::vector<double> p{0.0}, g{2.5};
    AdamConfig cfg;
    Adam adam(cfg);
    double before = 0.0;
    for (int i = 0; i < 2000; ++i) {
        before = p[0];
        adam.step(single(p, ParamGroup::Environment), single(g), 0.7);
    }
    EXPECT_NEAR(before - p[0], cfg.lrEnvironment * 0.7, 0.01 * cfg.lrEnvironment * 0.7);
}

TEST(Adam, RejectsNonFiniteValues) {
    std::vector<double> p{1.0, 2.0}, g{0.1, std::nan("")};
    Adam adam;
    EXPECT_THROW(adam.step(single(p), single(g), 1.0), Error);
    EXPECT_EQ(p, (std::vector<double>{1.0, 2.0}));
    std::vector<double> big{1.0}, gb{1.0};
    AdamConfig cfg;
    cfg.lrNetwork = std::numeric_limits<double>::infinity();
    Adam bad(cfg);
    try {
        bad.step(single(big), single(gb), 1.0);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("p"), std::string::npos);
    }
    EXPECT_EQ(big[0], 1.0);
}

TEST(Adam, FreshMomentsAfterResize) {
    std::vector<double> p{0.0}, g{1.0};
    Adam adam;
    for (int i = 0; i < 10; ++i) adam.step(single(p), single(g), 1.0);
    std::vector<double> q{0.0, 0.0}, gq{-1.0, 1.0};
    adam.step(single(q), single(gq), 1.0);
    EXPECT_NEAR(q[0], 1e-3, 1e-12);
    EXPECT_NEAR(q[1], -1e-3, 1e-12);
}

TEST(Gradients, MicroSceneMatchesFiniteDifferences) {
    testing::MicroScene s = testing::makeMicroScene(1);
    const testing::GradCheckResult r = testing::gradientCheck(s, 4);
    EXPECT_GE(r.probes, 50);
    EXPECT_EQ(r.failures, 0) << "worst " << r.worstRelative << " at " << r.worstName;
    // Every parameter family shows up.
    auto has = [&](const std::string& prefix) {
        for (const std::string& g : r.groupsProbed)
            if (g.rfind(prefix, 0) == 0) return true;
        return false;
    };
    EXPECT_TRUE(has("grid."));
    EXPECT_TRUE(has("decoder."));
    EXPECT_TRUE(has("gain."));
    EXPECT_TRUE(has("env."));
}

TEST(Gradients, RayMissingTheBoxLeavesGridUntouched) {
    testing::MicroScene s = testing::makeMicroScene(2);
    s.cameras[0].pose = lookAt({6.0, 0.0, 0.0}, {6.0, 0.0, 5.0}, {1.0, 0.0, 0.0});
    ModelGradient grad = ModelGradient::zerosLike(s.model);
    const Lighting light(s.model.env);
    pixelLoss(s.model, light, s.cameras, s.targets, s.pixels, s.render, s.lambda, 64.0, &grad);
    for (const ParamRef& p : grad.grid.params())
        for (double v : p.data) ASSERT_EQ(v, 0.0) << p.name;
}

// A dataset of one constant-color image; with an empty grid and the
// environment as background, only the environment can explain it.
SceneDataset constantImage(const Rgbd& srgb, int size) {
    SceneDataset d;
    d.split = "train";
    d.angleX = 0.8;
    Frame f;
    f.pose = lookAt({0.0, -4.0, 0.5}, {0.0, 0.0, 0.0});
    f.rgb = Image(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c) f.rgb.at(x, y, c) = static_cast<float>(srgb[c]);
    d.frames.push_back(f);
    return d;
}

Model emptyModel(int envH, int envW) {
    ModelShape shape;
    shape.grid.resolution = {8, 8, 8};
    shape.grid.densityRank = 1;
    shape.grid.featureRank = 1;
    shape.grid.featureDim = 2;
    shape.gainMode = GainMode::Identity;
    shape.envHeight = envH;
    shape.envWidth = envW;
    Model m = Model::create(shape, 1);
    for (int a = 0; a < 3; ++a) {
        std::fill(m.grid.densityPlanes[a].begin(), m.grid.densityPlanes[a].end(), 1.0);
        std::fill(m.grid.densityLines[a].begin(), m.grid.densityLines[a].end(), -15.0);
    }
    return m;
}

TEST(Training, EnvironmentConvergesOnAnEmptyScene) {
    const Rgbd color{0.8, 0.45, 0.25};
    const SceneDataset data = constantImage(color, 8);
    Model model = emptyModel(8, 16);
    TrainConfig cfg;
    cfg.schedule.warmupSteps = 10;
    cfg.schedule.totalSteps = 500;
    cfg.schedule.finalDecay = 0.1;
    cfg.schedule.upsampleSteps.clear();
    cfg.batchSize = 64;
    cfg.lambdaOrientation = 0.0;
    cfg.adam.lrEnvironment = 0.05;
    cfg.startResolution = cfg.finalResolution = 8;
    cfg.render.background = BackgroundMode::Environment;
    cfg.render.samplesPerRay = 8;
    cfg.render.secondaryBudget = 4;
    cfg.render.retraceBudget = 0;
    double first = -1.0, last = -1.0;
    TrainHooks hooks;
    hooks.afterStep = [&](const StepStats& st, const Model&) {
        if (first < 0.0) first = st.photometric;
        last = st.photometric;
    };
    train(model, data, cfg, hooks);
    EXPECT_GT(first, 1e-2);
    EXPECT_LT(last, 1e-3);
}

TrainConfig tinyTraining() {
    TrainConfig cfg;
    cfg.schedule.warmupSteps = 2;
    cfg.schedule.totalSteps = 6;
    cfg.schedule.upsampleSteps = {2, 4};
    cfg.batchSize = 16;
    cfg.startResolution = 4;
    cfg.finalResolution = 8;
    cfg.render.samplesPerRay = 8;
    cfg.render.secondaryBudget = 4;
    cfg.render.secondaryBudgetDeep = 2;
    cfg.render.retraceBudget = 1;
    cfg.seed = 5;
    return cfg;
}

SceneDataset microDataset() {
    const testing::MicroScene s = testing::makeMicroScene(4);
    SceneDataset d;
    d.split = "train";
    d.angleX = s.cameras[0].angleX;
    Frame f;
    f.pose = s.cameras[0].pose;
    f.rgb = s.targets[0];
    d.frames.push_back(f);
    return d;
}

TEST(Training, DeterministicLossCurveAndUpsampleEvents) {
    const SceneDataset data = microDataset();
    auto run = [&](int workers, std::vector<std::pair<int, int>>* events) {
        Model m = testing::makeMicroScene(4).model;
        TrainConfig cfg = tinyTraining();
        cfg.workers = workers;
        std::vector<double> losses;
        TrainHooks hooks;
        hooks.afterStep = [&](const StepStats& st, const Model&) { losses.push_back(st.loss); };
        if (events) hooks.onUpsample = [&](int step, int res) { events->push_back({step, res}); };
        train(m, data, cfg, hooks);
        return losses;
    };
    std::vector<std::pair<int, int>> events;
    const std::vector<double> a = run(1, &events);
    const std::vector<double> b = run(1, nullptr);
    const std::vector<double> c = run(2, nullptr);
    ASSERT_EQ(a.size(), 6u);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
    EXPECT_EQ(events, (std::vector<std::pair<int, int>>{{2, 6}, {4, 8}}));
}

TEST(Training, RejectsEmptyDatasets) {
    Model m = testing::makeMicroScene(1).model;
    EXPECT_THROW(train(m, SceneDataset{}, tinyTraining()), Error);
}

}  // namespace
}  // namespace nmf
