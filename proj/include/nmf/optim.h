// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

// Losses, Adam with per-group learning rates and the warmup/log-linear
// schedule, and the training loop with scheduled grid upsampling.

#pragma once

#include <nmf/dataset.h>
#include <nmf/model.h>
#include <nmf/render.h>

#include <functional>
#include <span>
#include <vector>

namespace nmf {

/// Step constants of the schedule. `scaled(f)` multiplies every step count
/// by f, leaving the multipliers alone.
struct Schedule {
    double warmupFloor = 0.1;  // m_w
    int warmupSteps = 100;     // N_w
    double finalDecay = 1e-3;  // d_w
    int totalSteps = 30000;    // N_T
    std::vector<int> upsampleSteps{500, 1000, 2000, 3000, 4000, 5500, 7000};

    static Schedule scaled(double factor);
};

/// [m_w + (1 - m_w) sin(pi/2 clip(i/N_w, 0, 1))] * d_w^(i/N_T)
double lrMultiplier(int i, const Schedule& s = {});

/// sum_j w_j max(0, -n_j . wo)^2 over pre-flip normals.
double orientationLoss(std::span<const double> weights, std::span<const Vec3d> normals, const Vec3d& wo);

/// Mean squared error over pixels and channels.
double photometricLoss(const Image& rendered, const Image& target);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-15;
    double lrGrid = 0.02;
    double lrNetwork = 1e-3;
    double lrEnvironment = 1e-3;

    double lr(ParamGroup g) const;
};

/// Adam with bias correction and double-precision moments. Moments are kept
/// per parameter array; an array whose size changed (after upsampling) gets
/// fresh zero moments and a fresh bias-correction count.
class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    /// One update. Throws, naming the array, if a gradient or updated value
    /// is not finite; parameters are left untouched in that case.
    void step(ParamList params, ParamList grads, double multiplier);
    int steps() const { return steps_; }
    const AdamConfig& config() const { return cfg_; }

  private:
    struct Moments {
        std::vector<double> m, v;
        int t = 0;
    };
    AdamConfig cfg_;
    std::vector<Moments> moments_;
    int steps_ = 0;
};

/// A pixel of a training image.
struct PixelRef {
    int image = 0;
    int x = 0, y = 0;
};

struct LossParts {
    double total = 0.0;
    double photometric = 0.0;   // mean squared error part, already normalized
    double orientation = 0.0;   // lambda-free orientation sum / normalizer
};

/// Loss of a set of pixels, normalized by `normalizer` rays:
///   sum_rays [ (1/3) sum_c (C_c - target_c)^2 + lambda * orientation ] / normalizer.
/// With a gradient buffer, each ray is recorded on `tape` and differentiated;
/// without one the loss is evaluated in plain doubles. A decision log makes
/// repeated evaluations follow identical sampling decisions.
LossParts pixelLoss(const Model& model, const Lighting& light, std::span<const Camera> cameras,
                    std::span<const Image> targets, std::span<const PixelRef> pixels, const RenderConfig& cfg,
                    double lambdaOrientation, double normalizer, ModelGradient* grad, DecisionLog* log = nullptr,
                    uint64_t imageSalt = 0);

struct TrainConfig {
    Schedule schedule;
    int batchSize = 1024;
    double lambdaOrientation = 1e-3;
    AdamConfig adam;
    int startResolution = 32;
    int finalResolution = 300;
    int gradChunks = 4;  // fixed reduction order, independent of the worker count
    int workers = 1;
    uint64_t seed = 0;
    RenderConfig render;
};

struct StepStats {
    int step = 0;
    double loss = 0.0;
    double photometric = 0.0;
    double orientation = 0.0;
    double psnr = 0.0;
    double lrMultiplier = 0.0;
    int resolution = 0;
};

struct TrainHooks {
    std::function<void(const StepStats&, const Model&)> afterStep;
    std::function<void(int step, int resolution)> onUpsample;
    /// Called with the last finite model before a divergence error is thrown.
    std::function<void(const Model&, int step)> onDivergence;
};

/// Runs the full optimization from `model` (modified in place).
void train(Model& model, const SceneDataset& data, const TrainConfig& cfg, const TrainHooks& hooks = {});

}  // namespace nmf
