// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

// Forward rendering: pinhole rays, stratified volume marching with
// quadrature weights, per-sample microfacet shading with a fixed budget of
// secondary rays, selective retracing of the most important secondary rays
// through the scene, compositing and sRGB tonemapping.
//
// The tracing code is generic in the scalar type (double or Var) and in the
// scene. A scene provides:
//
//   bounds(), voxelSize(), envHeight(), envWidth(), beginRay()
//   density(p) -> T
//   normal(p) -> SurfaceNormal<T>
//   material(p) -> MaterialSample<T>
//   gain(m, wo, wi, n) -> Rgb<T>
//   envMean(theta, phi, dTheta, dPhi, align) -> Rgb<T>
//   envRadiance(dir) -> Rgb<T>
//   irradiance(n) -> Rgb<T>
//
// Sampling decisions (secondary counts, drawn directions, retrace choices,
// early termination) are plain values; gradients only flow through the
// integrand.

#pragma once

#include <nmf/autodiff.h>
#include <nmf/envlight.h>
#include <nmf/image_io.h>
#include <nmf/materials.h>
#include <nmf/model.h>
#include <nmf/parallel.h>
#include <nmf/qmc.h>
#include <nmf/vec.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace nmf {

struct Ray {
    Vec3d origin;
    Vec3d dir;  // unit
};

/// Pinhole camera in the NeRF-Blender convention: looks along -z, y up.
struct Camera {
    int width = 0, height = 0;
    double angleX = 0.0;  // horizontal field of view, radians
    Mat4 pose;            // camera to world

    double focal() const { return 0.5 * width / std::tan(0.5 * angleX); }
};

/// Ray through pixel (px, py) offset by (u, v) in [0,1)^2 from its corner.
Ray generateRay(const Camera& cam, int px, int py, double u, double v);

enum class BackgroundMode { White, Black, Color, Environment };

struct RenderConfig {
    int secondaryBudget = 128;      // M, per primary ray
    int secondaryBudgetDeep = 16;   // per retraced secondary ray
    int retraceBudget = 4;          // R, per primary ray
    int maxBounces = 2;
    int samplesPerRay = 128;
    double near = 0.0;
    double far = 100.0;
    double transmittanceEps = 1e-4;
    double minShadeWeight = 1e-4;   // samples lighter than this are not shaded
    double retraceNoise = 0.1;      // noise scale as a fraction of the median multiplier
    double retraceOffsetVoxels = 2.0;
    BackgroundMode background = BackgroundMode::White;
    Rgbd backgroundColor{1.0, 1.0, 1.0};
    FootprintRule footprint = FootprintRule::SolidAngle;
    RectAlignment alignment = RectAlignment::Fractional;
    NormalKernel kernel;
    bool pixelJitter = false;       // false: rays through pixel centers
    uint64_t seed = 0;

    void validate() const;
    Rgbd backgroundRadiance() const;
};

/// Records every sampling decision on the first pass and replays it on later
/// passes, so perturbed re-renders (finite differences) take identical paths.
class DecisionLog {
  public:
    enum class Mode { Record, Replay };

    void record() { mode_ = Mode::Record, values_.clear(), cursor_ = 0; }
    void replay() { mode_ = Mode::Replay, cursor_ = 0; }
    Mode mode() const { return mode_; }

    double real(double v);
    int integer(int v) { return static_cast<int>(real(static_cast<double>(v))); }
    Vec3d vec(const Vec3d& v) { return {real(v.x), real(v.y), real(v.z)}; }
    size_t size() const { return values_.size(); }

  private:
    Mode mode_ = Mode::Record;
    std::vector<double> values_;
    size_t cursor_ = 0;
};

struct RenderContext {
    const RenderConfig& cfg;
    qmc::SampleStream stream;
    DecisionLog* log = nullptr;

    explicit RenderContext(const RenderConfig& c, DecisionLog* l = nullptr) : cfg(c), stream{c.seed}, log(l) {}

    int decide(int v) const { return log ? log->integer(v) : v; }
    double decide(double v) const { return log ? log->real(v) : v; }
    Vec3d decide(const Vec3d& v) const { return log ? log->vec(v) : v; }
};

template <typename T>
struct PrimarySample {
    double t = 0.0;
    Vec3d p;
    T sigma{};
    T weight{};
    Vec3<T> normal;     // flipped to face the viewer
    Vec3<T> rawNormal;  // as computed, before the flip
    bool valid = false;
    MaterialSample<T> material;
};

template <typename T>
struct RayResult {
    Rgb<T> radiance{T(0.0), T(0.0), T(0.0)};  // sum_j w_j L_j, background excluded
    T opacity{};                              // sum_j w_j
    T orientation{};                          // sum_j w_j max(0, -n_j . wo)^2
    Vec3d normal;                             // sum_j w_j n_j (flipped), values only
    double depth = 0.0;                       // sum_j w_j t_j
};

// --- small helpers ---------------------------------------------------------------

double tonemap(double linear);
Var tonemap(const Var& linear);
template <typename T>
Rgb<T> tonemap(const Rgb<T>& c) {
    return {tonemap(c.r), tonemap(c.g), tonemap(c.b)};
}

/// Secondary count floor(w M).
inline int secondaryCount(double w, int budget) {
    return std::max(0, static_cast<int>(std::floor(w * budget)));
}

/// Indices of the top-R scores after adding noise eta_i in [0, noiseScale),
/// eta_i = noise[i] * noiseScale. Ties break toward the lower index.
std::vector<int> selectRetrace(const std::vector<double>& scores, int r, double noiseScale,
                               const std::vector<double>& noise);

/// Median of a non-empty list (mean of the two middle values for even sizes).
double median(std::vector<double> v);

uint64_t childId(uint64_t parent, uint64_t index);

// --- marching -----------------------------------------------------------------------

/// Stratified samples with one jitter per ray, stopping once transmittance
/// falls below the threshold. Only positions, densities and weights are set.
template <typename Scene>
std::vector<PrimarySample<typename Scene::Scalar>> march(const Scene& scene, const RenderContext& ctx, const Ray& ray,
                                                         uint64_t rayId, double tMin = 0.0) {
    using T = typename Scene::Scalar;
    const RenderConfig& cfg = ctx.cfg;
    std::vector<PrimarySample<T>> out;
    double t0, t1;
    if (!scene.bounds().intersect(ray.origin, ray.dir, t0, t1)) return out;
    t0 = std::max({t0, cfg.near, tMin});
    t1 = std::min(t1, cfg.far);
    if (!(t1 > t0) || cfg.samplesPerRay <= 0) return out;
    const int n = cfg.samplesPerRay;
    const double dt = (t1 - t0) / n;
    const double jitter = qmc::hashUniform(ctx.stream.seed, rayId, 0x6a09e667f3bcc909ull);
    // Replays force the recorded sample count; otherwise march until the
    // transmittance drops below the threshold and record where that happened.
    const bool replaying = ctx.log && ctx.log->mode() == DecisionLog::Mode::Replay;
    const int stop = replaying ? ctx.decide(0) : n;
    T opticalDepth(0.0);
    out.reserve(std::min(stop, 64));
    for (int j = 0; j < stop; ++j) {
        PrimarySample<T> s;
        s.t = t0 + (j + jitter) * dt;
        s.p = ray.origin + ray.dir * s.t;
        s.sigma = scene.density(s.p);
        using std::exp;
        const T trans = exp(opticalDepth * -1.0);
        const T step = s.sigma * dt;
        s.weight = trans * (1.0 - exp(step * -1.0));
        opticalDepth = opticalDepth + step;
        out.push_back(std::move(s));
        if (!replaying && std::exp(-value(opticalDepth)) < cfg.transmittanceEps) break;
    }
    if (!replaying) ctx.decide(static_cast<int>(out.size()));
    return out;
}

// --- tracing --------------------------------------------------------------------------

template <typename Scene>
RayResult<typename Scene::Scalar> traceRay(const Scene& scene, const RenderContext& ctx, const Ray& ray,
                                           uint64_t rayId, int depth, double tMin = 0.0);

/// Radiance arriving along a secondary ray: the scene in front plus the
/// environment behind it.
template <typename Scene>
Rgb<typename Scene::Scalar> traceSecondary(const Scene& scene, const RenderContext& ctx, const Ray& ray,
                                           uint64_t rayId, int depth) {
    using T = typename Scene::Scalar;
    const double tMin = ctx.cfg.retraceOffsetVoxels * scene.voxelSize();
    const RayResult<T> r = traceRay(scene, ctx, ray, rayId, depth, tMin);
    return r.radiance + scene.envRadiance(ray.dir) * (T(1.0) - r.opacity);
}

namespace detail {

template <typename T>
struct SecondaryTerm {
    int sample = 0;     // index into the shaded samples
    Vec3d wi;
    Rgb<T> fresnel;
    Rgb<T> gain;
    T pdf{};            // solid-angle pdf of wi
    double score = 0.0; // max channel of w * g
};

template <typename T>
Rgb<T> guardFinite(const Rgb<T>& c) {
    if (isFinite(value(c))) return c;
    Diagnostics::global().nonFiniteTerms++;
    return Rgb<T>(T(0.0));
}

}  // namespace detail

template <typename Scene>
RayResult<typename Scene::Scalar> traceRay(const Scene& scene, const RenderContext& ctx, const Ray& ray,
                                           uint64_t rayId, int depth, double tMin) {
    using T = typename Scene::Scalar;
    const RenderConfig& cfg = ctx.cfg;
    RayResult<T> result;
    std::vector<PrimarySample<T>> samples = march(scene, ctx, ray, rayId, tMin);
    const Vec3d wo = ray.dir * -1.0;
    const int budget = depth == 0 ? cfg.secondaryBudget : cfg.secondaryBudgetDeep;
    const bool mayRetrace = depth + 1 < cfg.maxBounces && cfg.retraceBudget > 0;

    std::vector<int> shaded;                 // indices of samples that get shaded
    std::vector<Rgb<T>> diffuse;             // (rho/pi) E per shaded sample
    std::vector<int> counts;                 // N per shaded sample
    std::vector<Rgb<T>> shade;               // accumulated radiance per shaded sample
    std::vector<detail::SecondaryTerm<T>> terms;

    for (size_t j = 0; j < samples.size(); ++j) {
        PrimarySample<T>& s = samples[j];
        const double w = value(s.weight);
        result.opacity = result.opacity + s.weight;
        if (ctx.decide(w >= cfg.minShadeWeight ? 1 : 0) == 0) continue;
        const SurfaceNormal<T> sn = scene.normal(s.p);
        s.valid = ctx.decide(sn.valid ? 1 : 0) == 1;
        if (!s.valid) continue;  // zero-flag normals contribute nothing
        s.rawNormal = sn.n;
        const double facing = ctx.decide(dot(value(sn.n), wo) >= 0.0 ? 1.0 : -1.0);
        s.normal = sn.n * facing;
        const T back = clampMin(dot(s.rawNormal, Vec3<T>(wo)) * -1.0, 0.0);
        result.orientation = result.orientation + s.weight * back * back;
        result.normal += value(s.normal) * w;
        result.depth += w * s.t;
        s.material = scene.material(s.p);

        const int idx = static_cast<int>(shaded.size());
        shaded.push_back(static_cast<int>(j));
        const Rgb<T> d = s.material.albedo * scene.irradiance(s.normal) * kInvPi;
        diffuse.push_back(d);
        const Vec3d n = value(s.normal);
        const double cosNo = dot(n, wo);
        int count = ctx.decide(secondaryCount(w, budget));
        if (ctx.decide(cosNo <= 1e-6 ? 1 : 0) == 1) count = 0;
        counts.push_back(count);
        if (count == 0) {
            const Rgb<T> f = fresnelSchlick(s.material.f0, dot(s.normal, Vec3<T>(wo)));
            shade.push_back(detail::guardFinite((Rgb<T>(T(1.0)) - f) * d));
            continue;
        }
        shade.push_back(Rgb<T>(T(0.0)));

        const uint64_t sampleId = childId(rayId, j);
        const ShadingFrame<double> frame = shadingFrame(n);
        const Vec3d woLocal = frame.toLocal(wo);
        const double alpha = value(s.material.alpha);
        const std::vector<qmc::Point2> pts = qmc::allocate(sampleId, depth, count, ctx.stream);
        for (int i = 0; i < count; ++i) {
            const Vec3d h = ctx.decide(frame.toWorld(qmc::sampleVndf(pts[i].u, pts[i].v, woLocal, alpha).h));
            const qmc::Reflection refl = qmc::reflect(wo, h);
            const Rgb<T> fr = fresnelSchlick(s.material.f0, dot(h, wo));
            const Rgb<T> diffusePart = (Rgb<T>(T(1.0)) - fr) * d;
            if (ctx.decide(dot(refl.wi, n) <= 0.0 || refl.jacobian <= 0.0 ? 1 : 0) == 1) {
                shade[idx] += detail::guardFinite(diffusePart);
                continue;
            }
            detail::SecondaryTerm<T> term;
            term.sample = idx;
            term.wi = refl.wi;
            term.fresnel = fr;
            term.gain = scene.gain(s.material, wo, refl.wi, s.normal);
            term.pdf = clampMin(qmc::vndfPdf(h, wo, s.normal, s.material.alpha) / refl.jacobian, 1e-8);
            term.score = maxComponent(value(term.gain) * w);
            shade[idx] += detail::guardFinite(diffusePart);
            terms.push_back(std::move(term));
        }
    }

    // Global retrace selection over every secondary term of this ray.
    std::vector<char> retrace(terms.size(), 0);
    if (mayRetrace && !terms.empty()) {
        std::vector<double> scores(terms.size()), noise(terms.size());
        for (size_t k = 0; k < terms.size(); ++k) {
            scores[k] = terms[k].score;
            noise[k] = qmc::hashUniform(ctx.stream.seed, rayId, 0x5851f42d4c957f2dull + k);
        }
        const double scale = cfg.retraceNoise * median(scores);
        const std::vector<int> pick = selectRetrace(scores, cfg.retraceBudget, scale, noise);
        const int picked = ctx.decide(static_cast<int>(pick.size()));
        for (int k = 0; k < picked; ++k)
            retrace[ctx.decide(k < static_cast<int>(pick.size()) ? pick[k] : 0)] = 1;
    }

    for (size_t k = 0; k < terms.size(); ++k) {
        const detail::SecondaryTerm<T>& term = terms[k];
        const int count = counts[term.sample];
        Rgb<T> li;
        if (retrace[k]) {
            const PrimarySample<T>& s = samples[shaded[term.sample]];
            li = traceSecondary(scene, ctx, Ray{s.p, term.wi}, childId(childId(rayId, 0x9e37u), k), depth + 1);
        } else {
            double theta, phi;
            directionToSpherical(term.wi, theta, phi);
            T dTheta, dPhi;
            lookupRect<T>(cfg.footprint, term.pdf, theta, count, scene.envHeight(), scene.envWidth(), dTheta, dPhi);
            li = scene.envMean(theta, phi, dTheta, dPhi, cfg.alignment);
        }
        shade[term.sample] += detail::guardFinite(term.fresnel * term.gain * li);
    }

    for (size_t k = 0; k < shaded.size(); ++k) {
        const PrimarySample<T>& s = samples[shaded[k]];
        const Rgb<T> lk = counts[k] > 0 ? shade[k] * (1.0 / counts[k]) : shade[k];
        result.radiance += lk * s.weight;
    }
    return result;
}

// --- pixels and images -------------------------------------------------------------------

template <typename T>
struct PixelResult {
    Rgb<T> srgb;
    Rgb<T> linear;      // composited linear radiance
    T opacity{};
    T orientation{};
    Vec3d normal;       // unit, or zero where nothing was hit
    double depth = 0.0;
};

uint64_t pixelRayId(uint64_t image, int px, int py);

/// Renders one pixel: composite over the configured background, tonemap.
template <typename Scene>
PixelResult<typename Scene::Scalar> renderPixel(Scene& scene, const Camera& cam, int px, int py,
                                                const RenderContext& ctx, uint64_t image = 0) {
    using T = typename Scene::Scalar;
    scene.beginRay();
    const uint64_t id = pixelRayId(image, px, py);
    double u = 0.5, v = 0.5;
    if (ctx.cfg.pixelJitter) {
        u = qmc::hashUniform(ctx.stream.seed, id, 0x243f6a8885a308d3ull);
        v = qmc::hashUniform(ctx.stream.seed, id, 0x13198a2e03707344ull);
    }
    const Ray ray = generateRay(cam, px, py, u, v);
    const RayResult<T> r = traceRay(scene, ctx, ray, id, 0);
    PixelResult<T> out;
    const Rgb<T> bg = ctx.cfg.background == BackgroundMode::Environment ? scene.envRadiance(ray.dir)
                                                                        : Rgb<T>(ctx.cfg.backgroundRadiance());
    out.linear = r.radiance + bg * (T(1.0) - r.opacity);
    out.srgb = tonemap(out.linear);
    out.opacity = r.opacity;
    out.orientation = r.orientation;
    const double len = length(r.normal);
    out.normal = len > 1e-12 ? r.normal / len : Vec3d{};
    const double op = value(r.opacity);
    out.depth = op > 0.0 ? r.depth / op : 0.0;
    return out;
}

struct RenderOutput {
    Image srgb, linear, normal, opacity;
};

/// Renders an image with pixel-parallel workers; results do not depend on
/// the worker count. The scene is copied per row so it may keep per-ray state.
template <typename Scene>
RenderOutput renderImage(const Scene& scene, const Camera& cam, const RenderConfig& cfg, int workers,
                         uint64_t image = 0) {
    RenderOutput out{Image(cam.width, cam.height), Image(cam.width, cam.height), Image(cam.width, cam.height),
                     Image(cam.width, cam.height, 1)};
    const RenderContext ctx(cfg);
    parallelFor(cam.height, workers, [&](int y) {
        Scene local = scene;
        for (int x = 0; x < cam.width; ++x) {
            const PixelResult<double> p = renderPixel(local, cam, x, y, ctx, image);
            for (int c = 0; c < 3; ++c) {
                out.srgb.at(x, y, c) = static_cast<float>(p.srgb[c]);
                out.linear.at(x, y, c) = static_cast<float>(p.linear[c]);
                out.normal.at(x, y, c) = static_cast<float>(p.normal[c]);
            }
            out.opacity.at(x, y, 0) = static_cast<float>(p.opacity);
        }
    });
    return out;
}

/// Deterministic quadrature of the reflected radiance at a surface point:
/// the full BRDF times nearest-pixel environment radiance times the cosine,
/// on a (thetaSteps x 2*thetaSteps) midpoint grid over the upper hemisphere.
Rgbd bruteForceShade(const Vec3d& n, const Vec3d& wo, const MaterialSample<double>& m, const EnvironmentMap& env,
                     const GainNetwork& net, int thetaSteps);

}  // namespace nmf
