// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/render.h>

#include <algorithm>
#include <cmath>

namespace nmf {

Ray generateRay(const Camera& cam, int px, int py, double u, double v) {
    const double f = cam.focal();
    const Vec3d d{(px + u - 0.5 * cam.width) / f, -(py + v - 0.5 * cam.height) / f, -1.0};
    return {cam.pose.translation(), normalize(cam.pose.transformVector(d))};
}

void RenderConfig::validate() const {
    if (secondaryBudget < 0 || secondaryBudgetDeep < 0 || retraceBudget < 0)
        throw Error("render budgets must be non-negative");
    if (retraceBudget > secondaryBudget) throw Error("retrace budget R must not exceed the secondary budget M");
    if (maxBounces < 1 || maxBounces > 4) throw Error("max_bounces must be in [1, 4]");
    if (samplesPerRay < 1) throw Error("samples_per_ray must be at least 1");
    if (!(far > near) || near < 0.0) throw Error("need 0 <= near < far");
    if (!(transmittanceEps > 0.0 && transmittanceEps < 1.0)) throw Error("early-stop transmittance must be in (0, 1)");
    if (minShadeWeight < 0.0) throw Error("minimum shading weight must be non-negative");
}

Rgbd RenderConfig::backgroundRadiance() const {
    switch (background) {
        case BackgroundMode::White: return Rgbd(1.0);
        case BackgroundMode::Black: return Rgbd(0.0);
        default: return backgroundColor;
    }
}

double DecisionLog::real(double v) {
    if (mode_ == Mode::Record) {
        values_.push_back(v);
        return v;
    }
    if (cursor_ >= values_.size()) throw Error("decision replay ran past the recorded decisions");
    return values_[cursor_++];
}

double tonemap(double x) {
    double y = x <= 0.0031308 ? 12.92 * x : 1.055 * std::pow(x, 1.0 / 2.4) - 0.055;
    return std::clamp(y, 0.0, 1.0);
}

Var tonemap(const Var& x) {
    const double v = x.value();
    const double y = tonemap(v);
    if (x.isConstant()) return Var(y);
    double dy = 0.0;
    if (v <= 0.0031308)
        dy = y > 0.0 ? 12.92 : 0.0;
    else if (y < 1.0)
        dy = 1.055 / 2.4 * std::pow(v, 1.0 / 2.4 - 1.0);
    ad::Tape* tape = ad::Tape::current();
    return Var(y, tape->unary(x.node(), dy));
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    if (v.size() % 2) return v[mid];
    const double hi = v[mid];
    const double lo = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lo + hi);
}

std::vector<int> selectRetrace(const std::vector<double>& scores, int r, double noiseScale,
                               const std::vector<double>& noise) {
    std::vector<int> idx(scores.size());
    if (r <= 0) return {};
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<double> key(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) key[i] = scores[i] + (noise.empty() ? 0.0 : noise[i] * noiseScale);
    const size_t k = std::min(idx.size(), static_cast<size_t>(r));
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                      [&](int a, int b) { return key[a] > key[b] || (key[a] == key[b] && a < b); });
    idx.resize(k);
    return idx;
}

uint64_t childId(uint64_t parent, uint64_t index) {
    return qmc::mix64(parent ^ qmc::mix64(index + 0x9e3779b97f4a7c15ull));
}

uint64_t pixelRayId(uint64_t image, int px, int py) {
    return qmc::mix64((image << 40) ^ (static_cast<uint64_t>(py) << 20) ^ static_cast<uint64_t>(px));
}

Rgbd bruteForceShade(const Vec3d& n, const Vec3d& wo, const MaterialSample<double>& m, const EnvironmentMap& env,
                     const GainNetwork& net, int thetaSteps) {
    if (thetaSteps < 64) throw Error("quadrature needs at least 64 polar steps");
    const ShadingFrame<double> frame = shadingFrame(n);
    const int phiSteps = 2 * thetaSteps;
    const double dTheta = 0.5 * kPi / thetaSteps, dPhi = 2.0 * kPi / phiSteps;
    Rgbd sum(0.0);
    for (int i = 0; i < thetaSteps; ++i) {
        const double theta = (i + 0.5) * dTheta;
        const double weight = std::cos(theta) * std::sin(theta) * dTheta * dPhi;
        for (int k = 0; k < phiSteps; ++k) {
            const Vec3d wi = frame.toWorld(sphericalDirection(theta, (k + 0.5) * dPhi));
            if (lengthSquared(wi + wo) < 1e-12) continue;
            const Rgbd f = fullBrdf(wo, wi, n, m, net);
            sum += f * env.radianceAt(wi) * weight;
        }
    }
    return sum;
}

}  // namespace nmf
