// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

// Far-field illumination. The environment is an equirectangular image of
// log radiance: row r covers polar angles [r, r+1) * pi / H measured from +z,
// column c covers azimuths [c, c+1) * 2 pi / W.
//
// Rectangle means use exact fractional pixel coverage: the integral image
// of a piecewise-constant map is bilinear inside each cell, so a summed-area
// table evaluated with bilinear interpolation integrates the map over any
// real-valued rectangle. This keeps the mean continuous (and differentiable)
// in the rectangle's center and size.

#pragma once

#include <nmf/autodiff.h>
#include <nmf/materials.h>
#include <nmf/params.h>
#include <nmf/vec.h>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace nmf {

class EnvironmentMap {
  public:
    EnvironmentMap() = default;
    /// Constant radiance map (the default start is 0.5 everywhere).
    EnvironmentMap(int height, int width, double radiance = 0.5);
    /// From linear radiance, H x W x 3 row-major. Values must be positive.
    static EnvironmentMap fromRadiance(int height, int width, const std::vector<double>& rgb);

    int height() const { return height_; }
    int width() const { return width_; }

    Rgbd radianceAtPixel(int row, int col) const;
    /// Nearest-pixel radiance; phi wraps modulo 2 pi.
    Rgbd radianceAt(double theta, double phi) const;
    Rgbd radianceAt(const Vec3d& dir) const;
    /// Pixel containing the direction (row, col).
    std::array<int, 2> pixelOf(double theta, double phi) const;

    std::vector<double> radiance() const;
    /// Copy rotated about +z: the value seen at azimuth phi moves to phi + columns * 2pi/W.
    EnvironmentMap rotatedColumns(int columns) const;

    EnvironmentMap zerosLike() const;
    ParamList params();
    bool allFinite() const;

    std::vector<double> logValues;  // H x W x 3

  private:
    int height_ = 0, width_ = 0;
};

/// Prefix sums of linear radiance, (H+1) x (W+1) x 3.
class SummedAreaTable {
  public:
    SummedAreaTable() = default;
    explicit SummedAreaTable(const EnvironmentMap& env);

    int height() const { return height_; }
    int width() const { return width_; }
    /// Sum of radiance over rows [0, r) and columns [0, c).
    Rgbd at(int r, int c) const;
    /// Integral over the real rectangle [x0,x1] x [y0,y1] in pixel units
    /// (x along columns, no wrapping; 0 <= x0 <= x1 <= W, 0 <= y0 <= y1 <= H).
    Rgbd integrate(double x0, double x1, double y0, double y1) const;

    std::vector<double> sums;

  private:
    int height_ = 0, width_ = 0;
};

struct RectSize {
    double dTheta = 0.0, dPhi = 0.0;
};

/// Rectangle size with aspect dTheta/dPhi = sin(theta) and area such that
/// dTheta * dPhi * d = N * pdf, d = HW / (2 pi^2 sin(theta)).
/// sin(theta) is clamped to at least 1e-4.
RectSize rectSize(double pdf, double theta, int n, int height, int width);

/// Rectangle whose solid angle is 1/(N pdf), with the same aspect rule:
/// dTheta = sqrt(omega), dPhi = sqrt(omega) / sin(theta).
RectSize footprintSolidAngle(double pdf, double theta, int n);

/// How secondary-ray lookups size their rectangle.
enum class FootprintRule { SolidAngle, Literal };

/// Gradient sinks for everything derived from the environment during one
/// forward pass: rectangle means (via the table), SH coefficients, and direct
/// nearest-pixel lookups.
struct IrradianceSH;

struct EnvGradient {
    std::vector<double> sums;           // same layout as SummedAreaTable::sums
    std::array<double, 27> sh{};        // [coefficient * 3 + channel]
    std::vector<double> pixels;         // H x W x 3, adjoint of linear radiance

    explicit EnvGradient(int height = 0, int width = 0);
    void setZero();
    void add(const EnvGradient& o);
};

/// How fractional rectangle edges meet the pixel grid. Outward rounds the
/// edges to whole pixels (floor/ceil) and averages the covered pixels;
/// Fractional weights edge pixels by their exact coverage, which keeps the
/// mean differentiable in the rectangle size.
enum class RectAlignment { Fractional, Outward };

/// Mean radiance over [theta +- dTheta/2] x [phi +- dPhi/2]. Azimuth wraps,
/// polar range is truncated to [0, pi], and each extent is at least one pixel.
Rgbd meanQuery(const SummedAreaTable& sat, double theta, double phi, double dTheta, double dPhi,
               RectAlignment align = RectAlignment::Fractional);

/// Tracked mean: the backward pass adds into `grad` (when non-null) and into
/// the extents.
Rgb<Var> meanQuery(const SummedAreaTable& sat, double theta, double phi, const Var& dTheta, const Var& dPhi,
                   EnvGradient* grad, RectAlignment align = RectAlignment::Fractional);

/// Nearest-pixel radiance whose adjoint lands in grad->pixels.
Rgb<Var> trackedRadianceAt(const EnvironmentMap& env, const Vec3d& dir, EnvGradient* grad);

/// SH coefficients as tape leaves whose adjoints land in grad->sh.
std::array<Rgb<Var>, 9> trackedShCoefficients(const IrradianceSH& sh, EnvGradient* grad);

/// Sizes a lookup rectangle for a secondary direction with solid-angle pdf.
template <typename T>
void lookupRect(FootprintRule rule, const T& pdf, double theta, int n, int height, int width, T& dTheta, T& dPhi) {
    using std::sqrt;
    const double s = std::max(std::sin(theta), 1e-4);
    if (rule == FootprintRule::Literal) {
        dPhi = sqrt(2.0 * kPi * kPi * (static_cast<double>(n) / (static_cast<double>(height) * width)) * pdf);
        dTheta = dPhi * s;
    } else {
        const T omega = 1.0 / (static_cast<double>(n) * pdf);
        dTheta = sqrt(omega);
        dPhi = dTheta / s;
    }
}

/// Degree-2 SH projection of the radiance, 9 coefficients per channel.
struct IrradianceSH {
    static constexpr std::array<double, 3> kCosineLobe{kPi, 2.0 * kPi / 3.0, kPi / 4.0};
    std::array<Rgbd, 9> coeffs{};
};

IrradianceSH projectSh(const EnvironmentMap& env);

/// E(n) = sum_lm A_l c_lm Y_lm(n), clamped at zero.
template <typename T>
Rgb<T> irradiance(std::span<const Rgb<T>> coeffs, const Vec3<T>& n) {
    std::array<T, 9> y;
    shEncode<T>(n, 2, y);
    Rgb<T> e(T(0.0));
    for (int k = 0; k < 9; ++k) {
        const double a = IrradianceSH::kCosineLobe[k == 0 ? 0 : (k < 4 ? 1 : 2)];
        e += coeffs[k] * (a * y[k]);
    }
    return {clampMin(e.r, 0.0), clampMin(e.g, 0.0), clampMin(e.b, 0.0)};
}

Rgbd irradiance(const IrradianceSH& sh, const Vec3d& n);

/// Chains every sink in `grad` back to the log-radiance parameters.
void backpropagateEnvironment(const EnvironmentMap& env, const EnvGradient& grad, EnvironmentMap& logGrad);

}  // namespace nmf
