// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

// The learned scene: factored field, material decoder, gain network and
// environment map, plus the read-only lighting caches derived from the
// environment and a scene adapter the renderer can trace.

#pragma once

#include <nmf/envlight.h>
#include <nmf/field.h>
#include <nmf/materials.h>

#include <array>
#include <optional>

namespace nmf {

struct ModelShape {
    GridShape grid;
    GainMode gainMode = GainMode::Neural;
    int envHeight = 512;
    int envWidth = 1024;
    double envInit = 0.5;
};

struct Model {
    FactorGrid grid;
    MaterialDecoder decoder;
    GainNetwork gain;
    EnvironmentMap env;

    static Model create(const ModelShape& shape, uint64_t seed);

    ParamList params();
    bool allFinite() const;
};

/// Rounds every value to the nearest float so checkpoints round-trip exactly.
void roundToFloat(ParamList params);

/// Gradient buffers matching a Model. The environment accumulates into the
/// table/SH/pixel sinks first and is chained to log radiance by finish().
struct ModelGradient {
    FactorGrid grid;
    MaterialDecoder decoder;
    GainNetwork gain;
    EnvGradient envSinks;
    EnvironmentMap env;  // d(loss)/d(log radiance)

    static ModelGradient zerosLike(const Model& m);
    void setZero();
    void add(const ModelGradient& o);
    /// Chains the environment sinks into `env`.
    void finish(const Model& m);
    /// Parameter views in the same order as Model::params().
    ParamList params();
};

/// Everything derived from the environment once per parameter update.
struct Lighting {
    SummedAreaTable sat;
    IrradianceSH sh;

    explicit Lighting(const EnvironmentMap& env) : sat(env), sh(projectSh(env)) {}
};

template <typename T>
struct SurfaceNormal {
    Vec3<T> n;           // -grad / |grad|, before any flip
    bool valid = false;  // false where the gradient vanishes
};

/// Adapter exposing a Model to the renderer. With T = Var the lookups are
/// recorded on the current tape and gradients land in `grad`.
template <typename T>
class ModelScene {
  public:
    using Scalar = T;

    ModelScene(const Model& model, const Lighting& light, ModelGradient* grad = nullptr,
               NormalKernel kernel = {})
        : model_(model), light_(light), grad_(grad), kernel_(kernel) {}

    const Aabb& bounds() const { return model_.grid.bounds(); }
    double voxelSize() const {
        const Vec3d s = model_.grid.spacing();
        return std::max(s.x, std::max(s.y, s.z));
    }
    int envHeight() const { return model_.env.height(); }
    int envWidth() const { return model_.env.width(); }

    /// Called at the start of each primary ray (after the tape was cleared).
    void beginRay() {
        if constexpr (kTracked<T>) shVars_ = trackedShCoefficients(light_.sh, grad_ ? &grad_->envSinks : nullptr);
    }

    T density(const Vec3d& p) const {
        if constexpr (kTracked<T>)
            return trackedDensity(model_.grid, grad_ ? &grad_->grid : nullptr, p);
        else
            return model_.grid.density(p);
    }

    SurfaceNormal<T> normal(const Vec3d& p) const {
        if (!model_.grid.bounds().contains(p)) return {};
        Vec3<T> g;
        if constexpr (kTracked<T>)
            g = trackedDensityGradient(model_.grid, grad_ ? &grad_->grid : nullptr, p, kernel_);
        else
            g = model_.grid.densityGradient(p, kernel_);
        const double len = length(value(g));
        if (!(len >= 1e-12) || !std::isfinite(len)) return {};
        return {g * (-1.0 / length(g)), true};
    }

    MaterialSample<T> material(const Vec3d& p) const {
        if constexpr (kTracked<T>) {
            const std::vector<Var> x = trackedFeature(model_.grid, grad_ ? &grad_->grid : nullptr, p);
            return model_.decoder.decode(x, grad_ ? &grad_->decoder : nullptr);
        } else {
            return model_.decoder.decode(model_.grid.feature(p));
        }
    }

    Rgb<T> gain(const MaterialSample<T>& m, const Vec3d& wo, const Vec3d& wi, const Vec3<T>& n) const {
        return nmf::gain<T>(m.feature, Vec3<T>(wo), Vec3<T>(wi), n, model_.gain, grad_ ? &grad_->gain : nullptr);
    }

    Rgb<T> envMean(double theta, double phi, const T& dTheta, const T& dPhi, RectAlignment align) const {
        if constexpr (kTracked<T>)
            return meanQuery(light_.sat, theta, phi, dTheta, dPhi, grad_ ? &grad_->envSinks : nullptr, align);
        else
            return meanQuery(light_.sat, theta, phi, dTheta, dPhi, align);
    }

    Rgb<T> envRadiance(const Vec3d& dir) const {
        if constexpr (kTracked<T>)
            return trackedRadianceAt(model_.env, dir, grad_ ? &grad_->envSinks : nullptr);
        else
            return model_.env.radianceAt(dir);
    }

    Rgb<T> irradiance(const Vec3<T>& n) const {
        if constexpr (kTracked<T>)
            return nmf::irradiance<Var>(std::span<const Rgb<Var>>(shVars_), n);
        else
            return nmf::irradiance(light_.sh, n);
    }

  private:
    const Model& model_;
    const Lighting& light_;
    ModelGradient* grad_;
    NormalKernel kernel_;
    std::array<Rgb<T>, 9> shVars_{};
};

}  // namespace nmf
