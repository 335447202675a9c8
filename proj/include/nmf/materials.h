// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

// Per-point material decoding and the analytic microfacet terms:
// Schlick Fresnel, Trowbridge-Reitz distribution, Smith masking, the local
// shading frame, half/difference encoding, real spherical harmonics, and
// the learned gain network that multiplies the specular lobe.
//
// Most functions are templates over the scalar type so the same code runs
// on plain doubles (rendering) and on tracked `Var`s (training).

#pragma once

#include <nmf/autodiff.h>
#include <nmf/params.h>
#include <nmf/vec.h>

#include <array>
#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

namespace nmf {

inline constexpr double kAlphaMin = 0.01;

/// Counters for silently repaired numerical conditions.
struct Diagnostics {
    std::atomic<uint64_t> fresnelClamps{0};
    std::atomic<uint64_t> nonFiniteTerms{0};
    std::atomic<uint64_t> grazingClamps{0};

    static Diagnostics& global();
    void reset();
};

template <typename T>
struct MaterialSample {
    T alpha{};
    Rgb<T> albedo;
    Rgb<T> f0;
    std::vector<T> feature;
};

// --- analytic terms ----------------------------------------------------------

/// Clamps cosOH into [0,1], counting clamps.
double clampCosine(double cosOH);

/// Schlick's approximation. A tracked cosine carries gradients wherever it
/// was not clamped.
template <typename T, typename C>
Rgb<T> fresnelSchlick(const Rgb<T>& f0, const C& cosOH) {
    const double c = clampCosine(value(cosOH));
    T m(1.0 - c);
    if constexpr (kTracked<C>) {
        if (c == value(cosOH)) m = 1.0 - cosOH;
    }
    const T m5 = m * m * m * m * m;
    return f0 + (Rgb<T>(T(1.0)) - f0) * m5;
}

/// Trowbridge-Reitz normal distribution; zero for cosNH <= 0.
template <typename T, typename C>
T trDistribution(const C& cosNH, const T& alpha) {
    if (value(alpha) <= 0.0) throw Error("roughness must be positive");
    if (value(cosNH) <= 0.0) return T(0.0);
    const T a2 = alpha * alpha;
    const T denom = cosNH * cosNH * (a2 - 1.0) + 1.0;
    return a2 / (kPi * denom * denom);
}

/// Smith masking for Trowbridge-Reitz; zero for cosNV <= 0.
template <typename T, typename C>
T smithG1(const C& cosNV, const T& alpha) {
    using std::sqrt;
    if (value(cosNV) <= 0.0) return T(0.0);
    const T a2 = alpha * alpha;
    return 2.0 * cosNV / (cosNV + sqrt(a2 + (1.0 - a2) * (cosNV * cosNV)));
}

/// Orthonormal frame whose rows are (T, B, n); F * v expresses v locally.
template <typename T>
struct ShadingFrame {
    Vec3<T> t, b, n;

    Vec3<T> toLocal(const Vec3<T>& v) const { return {dot(t, v), dot(b, v), dot(n, v)}; }
    Vec3<T> toWorld(const Vec3<T>& v) const { return t * v.x + b * v.y + n * v.z; }
};

template <typename T>
ShadingFrame<T> shadingFrame(const Vec3<T>& n) {
    const Vec3d nv = value(n);
    if (lengthSquared(nv) < 1e-24) throw Error("shading frame of a zero vector");
    Vec3<T> axis(T(0.0), T(0.0), T(1.0));
    Vec3<T> t = cross(axis, n);
    if (length(value(t)) < 1e-6) t = cross(Vec3<T>(T(1.0), T(0.0), T(0.0)), n);
    t = normalize(t);
    return {t, cross(n, t), n};
}

template <typename T>
struct HalfDiff {
    Vec3<T> half;  // half vector in the shading frame of n
    Vec3<T> diff;  // incident direction in the frame of the local half vector
};

template <typename T>
HalfDiff<T> halfDiffEncode(const Vec3<T>& wo, const Vec3<T>& wi, const Vec3<T>& n) {
    const Vec3<T> s = wo + wi;
    if (lengthSquared(value(s)) < 1e-20) throw Error("half vector undefined for opposite directions");
    const ShadingFrame<T> frame = shadingFrame(n);
    HalfDiff<T> hd;
    hd.half = frame.toLocal(normalize(s));
    hd.diff = shadingFrame(hd.half).toLocal(frame.toLocal(wi));
    return hd;
}

inline constexpr int shCount(int degree) { return (degree + 1) * (degree + 1); }

/// Real orthonormal spherical harmonics Y_l^m, l = 0..degree (degree <= 4),
/// ordered by l then m = -l..l. Writes shCount(degree) values.
template <typename T>
void shEncode(const Vec3<T>& v, int degree, std::span<T> out) {
    const T& x = v.x;
    const T& y = v.y;
    const T& z = v.z;
    out[0] = T(0.28209479177387814);
    if (degree < 1) return;
    out[1] = 0.4886025119029199 * y;
    out[2] = 0.4886025119029199 * z;
    out[3] = 0.4886025119029199 * x;
    if (degree < 2) return;
    const T xx = x * x, yy = y * y, zz = z * z;
    const T xy = x * y, yz = y * z, xz = x * z;
    out[4] = 1.0925484305920792 * xy;
    out[5] = 1.0925484305920792 * yz;
    out[6] = 0.31539156525252005 * (3.0 * zz - 1.0);
    out[7] = 1.0925484305920792 * xz;
    out[8] = 0.5462742152960396 * (xx - yy);
    if (degree < 3) return;
    out[9] = 0.5900435899266435 * y * (3.0 * xx - yy);
    out[10] = 2.890611442640554 * xy * z;
    out[11] = 0.4570457994644658 * y * (5.0 * zz - 1.0);
    out[12] = 0.3731763325901154 * z * (5.0 * zz - 3.0);
    out[13] = 0.4570457994644658 * x * (5.0 * zz - 1.0);
    out[14] = 1.445305721320277 * z * (xx - yy);
    out[15] = 0.5900435899266435 * x * (xx - 3.0 * yy);
    if (degree < 4) return;
    out[16] = 2.5033429417967046 * xy * (xx - yy);
    out[17] = 1.7701307697799304 * yz * (3.0 * xx - yy);
    out[18] = 0.9461746957575601 * xy * (7.0 * zz - 1.0);
    out[19] = 0.6690465435572892 * yz * (7.0 * zz - 3.0);
    out[20] = 0.10578554691520431 * (35.0 * zz * zz - 30.0 * zz + 3.0);
    out[21] = 0.6690465435572892 * xz * (7.0 * zz - 3.0);
    out[22] = 0.47308734787878004 * (xx - yy) * (7.0 * zz - 1.0);
    out[23] = 1.7701307697799304 * xz * (xx - 3.0 * yy);
    out[24] = 0.6258357354491761 * (xx * (xx - 3.0 * yy) - yy * (3.0 * xx - yy));
}

std::vector<double> shEncode(const Vec3d& v, int degree = 4);

// --- learned components --------------------------------------------------------

/// Fully connected layer y = W x + b with W stored row-major (out x in).
class DenseLayer {
  public:
    DenseLayer() = default;
    DenseLayer(int in, int out);

    int inputs() const { return in_; }
    int outputs() const { return out_; }

    void initUniform(uint64_t seed, double scale);
    void forward(std::span<const double> x, std::span<double> y) const;
    /// Tracked forward; the backward pass accumulates into `grad` when non-null.
    std::vector<Var> forward(std::span<const Var> x, DenseLayer* grad) const;

    std::vector<double> weights;
    std::vector<double> bias;

  private:
    int in_ = 0, out_ = 0;
};

/// Linear heads + sigmoid from features to (alpha, albedo, F0).
class MaterialDecoder {
  public:
    MaterialDecoder() = default;
    explicit MaterialDecoder(int featureDim, double alphaMin = kAlphaMin);

    static MaterialDecoder random(int featureDim, uint64_t seed, double alphaMin = kAlphaMin);

    double alphaMin() const { return alphaMin_; }
    int featureDim() const { return layer.inputs(); }

    MaterialSample<double> decode(std::span<const double> x) const;
    MaterialSample<Var> decode(std::span<const Var> x, MaterialDecoder* grad) const;

    MaterialDecoder zerosLike() const { return MaterialDecoder(layer.inputs(), alphaMin_); }
    ParamList params();

    DenseLayer layer;  // 7 outputs: alpha, albedo rgb, F0 rgb

  private:
    double alphaMin_ = kAlphaMin;
};

enum class GainMode { Neural, Identity };

/// Specular gain g(x, wo, wi): a perceptron on the degree-4 SH encodings of
/// the local half and difference vectors concatenated with the feature.
/// Hidden layers use softplus; the output is a sigmoid.
class GainNetwork {
  public:
    static constexpr int kHidden = 64;
    static constexpr int kShDegree = 4;

    GainNetwork() = default;
    GainNetwork(int featureDim, GainMode mode);

    static GainNetwork random(int featureDim, GainMode mode, uint64_t seed);

    GainMode mode() const { return mode_; }
    int featureDim() const { return featureDim_; }
    int inputDim() const { return 2 * shCount(kShDegree) + featureDim_; }

    /// Evaluates the network on an already encoded direction pair.
    Rgbd evaluate(const HalfDiff<double>& hd, std::span<const double> x) const;
    Rgb<Var> evaluate(const HalfDiff<Var>& hd, std::span<const Var> x, GainNetwork* grad) const;

    GainNetwork zerosLike() const { return GainNetwork(featureDim_, mode_); }
    ParamList params();

    std::array<DenseLayer, 3> layers;

  private:
    GainMode mode_ = GainMode::Identity;
    int featureDim_ = 0;
};

/// g(x, wo, wi) in world space: encodes the pair in the frame of n and evaluates.
template <typename T>
Rgb<T> gain(std::span<const T> x, const Vec3<T>& wo, const Vec3<T>& wi, const Vec3<T>& n, const GainNetwork& net,
            GainNetwork* grad = nullptr) {
    if (net.mode() == GainMode::Identity) return Rgb<T>(T(1.0));
    const HalfDiff<T> hd = halfDiffEncode(wo, wi, n);
    if constexpr (kTracked<T>)
        return net.evaluate(hd, x, grad);
    else
        return net.evaluate(hd, x);
}

/// Specular lobe D G1(wo) g / (4 cosNV cosNL); the reference path used by the
/// quadrature oracle. Zero when either direction is below the surface.
Rgbd specularBrdf(const Vec3d& wo, const Vec3d& wi, const Vec3d& n, const MaterialSample<double>& m,
                  const GainNetwork& net);

/// Full BRDF (rho/pi)(1 - F) + F f_s evaluated at the half vector of the pair.
Rgbd fullBrdf(const Vec3d& wo, const Vec3d& wi, const Vec3d& n, const MaterialSample<double>& m,
              const GainNetwork& net);

}  // namespace nmf
