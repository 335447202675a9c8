// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

// Low-rank vector-matrix factored field holding density and material
// features. Each of the three modes pairs a plane (two axes) with a line
// along the remaining axis:
//
//   raw(p)  = sum_m sum_r P_m[r](p_a, p_b) * L_m[r](p_c)
//   x(p)    = B * [P_m[r] * L_m[r]]_{m,r}
//   sigma   = softplus(raw)
//
// Lattice point i along an axis sits at lo + i * (hi - lo) / (res - 1), so
// the lattice spans the bounding box corner to corner.

#pragma once

#include <nmf/autodiff.h>
#include <nmf/params.h>
#include <nmf/vec.h>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace nmf {

struct GridShape {
    std::array<int, 3> resolution{32, 32, 32};
    int densityRank = 8;
    int featureRank = 24;
    int featureDim = 27;
    Aabb bounds;
};

/// Smoothed central-difference normal kernel: the difference along one axis
/// is blurred by a normalized 3-tap Gaussian along each of the other two.
struct NormalKernel {
    std::array<double, 3> taps{0.25, 0.5, 0.25};

    /// Taps of a sampled Gaussian with the given sigma, normalized to sum 1.
    static NormalKernel gaussian(double sigma);
};

/// Unnormalized density gradient and the resulting unit normal (or a zero flag).
struct NormalResult {
    Vec3d gradient;
    Vec3d normal;
    bool valid = false;
};

class FactorGrid {
  public:
    FactorGrid() = default;
    explicit FactorGrid(const GridShape& shape);

    /// Factors drawn uniformly from [-scale, scale]; the feature basis uses
    /// the usual fan-in scaling of a linear layer.
    static FactorGrid random(const GridShape& shape, uint64_t seed, double scale = 0.1);

    const GridShape& shape() const { return shape_; }
    const Aabb& bounds() const { return shape_.bounds; }
    std::array<int, 3> resolution() const { return shape_.resolution; }
    /// World-space lattice spacing per axis.
    Vec3d spacing() const;

    FactorGrid zerosLike() const { return FactorGrid(shape_); }
    void setZero();

    double rawDensity(const Vec3d& p) const;
    /// softplus(raw) inside the box, 0 outside.
    double density(const Vec3d& p) const;
    /// Feature vector (featureDim wide); zero outside the box.
    void feature(const Vec3d& p, std::span<double> out) const;
    std::vector<double> feature(const Vec3d& p) const;

    /// Raw (pre-activation) density at an integer lattice point; indices are
    /// clamped to the lattice.
    double rawDensityAtLattice(int i, int j, int k) const;

    /// Gaussian-smoothed central difference of the density lattice,
    /// trilinearly interpolated to p, world units. Throws when p is outside.
    Vec3d densityGradient(const Vec3d& p, const NormalKernel& kernel = {}) const;
    /// -grad/|grad|, zero-flagged below 1e-12. Throws when p is outside.
    NormalResult normalAt(const Vec3d& p, const NormalKernel& kernel = {}) const;

    // Backward passes: accumulate d(loss)/d(factor) into `grad` given the
    // adjoint of the corresponding forward output.
    void accumulateRawDensity(const Vec3d& p, double dRaw, FactorGrid& grad) const;
    void accumulateFeature(const Vec3d& p, std::span<const double> dFeature, FactorGrid& grad) const;
    void accumulateDensityGradient(const Vec3d& p, const Vec3d& dGradient, FactorGrid& grad,
                                   const NormalKernel& kernel = {}) const;

    /// Linear resampling of every factor onto a finer lattice. Throws on downsampling.
    FactorGrid upsampled(const std::array<int, 3>& newResolution) const;

    ParamList params();
    /// Sum of squares of every factor, for diagnostics.
    double squaredNorm() const;
    bool allFinite() const;

    // Factor storage, public for serialization and for tests that build
    // analytic fields. Plane m is indexed [(ia * resB + ib) * rank + r],
    // line m is indexed [ic * rank + r].
    std::array<std::vector<double>, 3> densityPlanes, densityLines;
    std::array<std::vector<double>, 3> featurePlanes, featureLines;
    std::vector<double> basis;  // featureDim x (3 * featureRank), row-major

    /// Axes (plane a, plane b, line c) of mode m.
    static std::array<int, 3> modeAxes(int m);

  private:
    struct Interp;
    Interp locate(const Vec3d& p) const;

    GridShape shape_;
};

/// Resolution after `event` of `numEvents` upsampling steps, linear in
/// resolution between `start` and `end`.
int scheduledResolution(int start, int end, int event, int numEvents);

// Tracked lookups: on a tape these record custom operations whose backward
// pass scatters into `grad`; with a null grad the factors act as constants.
Var trackedDensity(const FactorGrid& grid, FactorGrid* grad, const Vec3d& p);
std::vector<Var> trackedFeature(const FactorGrid& grid, FactorGrid* grad, const Vec3d& p);
Vec3<Var> trackedDensityGradient(const FactorGrid& grid, FactorGrid* grad, const Vec3d& p,
                                 const NormalKernel& kernel);

}  // namespace nmf
