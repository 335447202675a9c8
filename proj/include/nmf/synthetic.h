// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

// Analytic ground-truth scene: a soft sphere of constant material lit by a
// procedural environment with a few bright landmarks. It implements the same
// scene interface as ModelScene<double>, so reference images come from the
// same renderer with generous budgets.

#pragma once

#include <nmf/config.h>
#include <nmf/dataset.h>
#include <nmf/model.h>
#include <nmf/render.h>

#include <memory>
#include <string>
#include <vector>

namespace nmf {

/// Sky gradient plus colored Gaussian blobs, linear radiance.
EnvironmentMap proceduralEnvironment(int height, int width);

/// Unit directions of the landmark blobs in proceduralEnvironment.
std::vector<Vec3d> environmentLandmarks();

class AnalyticScene {
  public:
    using Scalar = double;

    AnalyticScene(const SyntheticConfig& cfg, const EnvironmentMap& env);

    const Aabb& bounds() const { return bounds_; }
    double voxelSize() const { return bounds_.extent().x / 64.0; }
    int envHeight() const { return env_->height(); }
    int envWidth() const { return env_->width(); }
    void beginRay() {}

    double density(const Vec3d& p) const;
    SurfaceNormal<double> normal(const Vec3d& p) const;
    MaterialSample<double> material(const Vec3d& p) const;
    Rgbd gain(const MaterialSample<double>&, const Vec3d&, const Vec3d&, const Vec3d&) const { return Rgbd(1.0); }
    Rgbd envMean(double theta, double phi, double dTheta, double dPhi, RectAlignment align) const {
        return meanQuery(light_->sat, theta, phi, dTheta, dPhi, align);
    }
    Rgbd envRadiance(const Vec3d& dir) const { return env_->radianceAt(dir); }
    Rgbd irradiance(const Vec3d& n) const { return nmf::irradiance(light_->sh, n); }

    const EnvironmentMap& environment() const { return *env_; }
    const SyntheticConfig& config() const { return cfg_; }

  private:
    SyntheticConfig cfg_;
    Aabb bounds_;
    std::shared_ptr<const EnvironmentMap> env_;
    std::shared_ptr<const Lighting> light_;
};

/// Render settings used for reference images.
RenderConfig syntheticRenderConfig(const SyntheticConfig& cfg);

/// Camera poses on a sphere around the origin (golden-angle spiral over the
/// upper two thirds of the sphere); the test split is offset from the train split.
std::vector<Mat4> syntheticPoses(const SyntheticConfig& cfg, int count, bool test);

/// Writes train/test images, normal and opacity maps, transforms files and
/// env.pfm into `dir`. Output depends only on the configuration.
void writeSyntheticDataset(const std::string& dir, const SyntheticConfig& cfg, int workers);

}  // namespace nmf
