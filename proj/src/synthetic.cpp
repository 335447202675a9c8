// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/synthetic.h>

#include <nmf/image_io.h>
#include <nmf/log.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace nmf {

namespace {

struct Blob {
    Vec3d dir;
    Rgbd color;
    double width;  // angular std-dev, radians
};

Vec3d fromSpherical(double theta, double phi) {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

const std::vector<Blob>& blobs() {
    static const std::vector<Blob> b = {
        {fromSpherical(0.9, 0.6), {12.0, 9.0, 5.0}, 0.12},
        {fromSpherical(1.25, 2.6), {2.0, 5.0, 12.0}, 0.15},
        {fromSpherical(1.05, 4.4), {10.0, 2.5, 2.5}, 0.13},
    };
    return b;
}

}  // namespace

EnvironmentMap proceduralEnvironment(int height, int width) {
    std::vector<double> rgb(static_cast<size_t>(height) * width * 3);
    for (int r = 0; r < height; ++r) {
        const double theta = (r + 0.5) * kPi / height;
        for (int c = 0; c < width; ++c) {
            const double phi = (c + 0.5) * 2.0 * kPi / width;
            const Vec3d d = fromSpherical(theta, phi);
            // Sky above the horizon fading to a dim warm ground below.
            const double up = std::clamp(d.z, -1.0, 1.0);
            Rgbd col = up >= 0.0 ? Rgbd{0.35 + 0.25 * up, 0.45 + 0.25 * up, 0.6 + 0.3 * up}
                                 : Rgbd{0.18 + 0.04 * up, 0.15 + 0.03 * up, 0.12 + 0.02 * up};
            for (const Blob& b : blobs()) {
                const double ang = std::acos(std::clamp(dot(d, b.dir), -1.0, 1.0));
                col += b.color * std::exp(-0.5 * ang * ang / (b.width * b.width));
            }
            for (int k = 0; k < 3; ++k) rgb[(static_cast<size_t>(r) * width + c) * 3 + k] = col[k];
        }
    }
    return EnvironmentMap::fromRadiance(height, width, rgb);
}

std::vector<Vec3d> environmentLandmarks() {
    std::vector<Vec3d> out;
    for (const Blob& b : blobs()) out.push_back(b.dir);
    return out;
}

AnalyticScene::AnalyticScene(const SyntheticConfig& cfg, const EnvironmentMap& env)
    : cfg_(cfg),
      env_(std::make_shared<const EnvironmentMap>(env)),
      light_(std::make_shared<const Lighting>(env)) {
    const double b = 1.5 * cfg.radius;
    bounds_.lo = {-b, -b, -b};
    bounds_.hi = {b, b, b};
}

double AnalyticScene::density(const Vec3d& p) const {
    const double s = (length(p) - cfg_.radius) / cfg_.sharpness;
    return cfg_.sigmaMax / (1.0 + std::exp(s));
}

SurfaceNormal<double> AnalyticScene::normal(const Vec3d& p) const {
    const double len = length(p);
    if (len < 1e-9 || !bounds_.contains(p)) return {};
    return {p / len, true};
}

MaterialSample<double> AnalyticScene::material(const Vec3d& p) const {
    MaterialSample<double> m;
    m.alpha = cfg_.roughness;
    m.albedo = cfg_.albedo;
    if (cfg_.checker > 0 && length(p) > 1e-9) {
        // Cells of equal angular size in latitude and longitude.
        const Vec3d d = normalize(p);
        const double cell = 2.0 * kPi / cfg_.checker;
        const int u = static_cast<int>(std::floor((std::atan2(d.y, d.x) + kPi) / cell));
        const int v = static_cast<int>(std::floor(std::acos(std::clamp(d.z, -1.0, 1.0)) / cell));
        if ((u + v) % 2 == 1) m.albedo = cfg_.albedoAlt;
    }
    m.f0 = cfg_.f0;
    return m;
}

RenderConfig syntheticRenderConfig(const SyntheticConfig& cfg) {
    RenderConfig rc;
    rc.secondaryBudget = cfg.secondaryBudget;
    rc.samplesPerRay = cfg.samplesPerRay;
    rc.maxBounces = 1;  // a convex object never sees itself
    rc.retraceBudget = 0;
    rc.seed = cfg.seed;
    rc.background = BackgroundMode::White;
    return rc;
}

std::vector<Mat4> syntheticPoses(const SyntheticConfig& cfg, int count, bool test) {
    std::vector<Mat4> poses;
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    const double offset = test ? 0.5 : 0.0;
    for (int i = 0; i < count; ++i) {
        const double t = (i + 0.5 + offset * 0.5) / count;
        const double z = 1.0 - t * (4.0 / 3.0);  // from the pole down to z = -1/3
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * (i + offset) + (test ? 0.7 : 0.0);
        const Vec3d dir{rho * std::cos(phi), rho * std::sin(phi), z};
        poses.push_back(lookAt(dir * cfg.cameraDistance, Vec3d{}));
    }
    return poses;
}

namespace {

Image gray(const Image& oneChannel) {
    Image out(oneChannel.width, oneChannel.height, 3);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = std::clamp(oneChannel.at(x, y, 0), 0.0f, 1.0f);
    return out;
}

}  // namespace

void writeSyntheticDataset(const std::string& dir, const SyntheticConfig& cfg, int workers) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir));
    const EnvironmentMap env = proceduralEnvironment(cfg.envHeight, cfg.envWidth);
    const AnalyticScene scene(cfg, env);
    const RenderConfig rc = syntheticRenderConfig(cfg);
    const double angleX = cfg.fovDegrees * kPi / 180.0;

    for (const bool test : {false, true}) {
        const std::string split = test ? "test" : "train";
        const int count = test ? cfg.testViews : cfg.trainViews;
        if (count == 0) continue;
        fs::create_directories(fs::path(dir) / split);
        const std::vector<Mat4> poses = syntheticPoses(cfg, count, test);
        std::vector<std::string> files, normals, opacities;
        for (int i = 0; i < count; ++i) {
            Camera cam;
            cam.width = cfg.width;
            cam.height = cfg.height;
            cam.angleX = angleX;
            cam.pose = poses[i];
            const RenderOutput out = renderImage(scene, cam, rc, workers, static_cast<uint64_t>(i) + (test ? 1000003u : 0u));
            const std::string stem = split + "/r_" + std::to_string(i);
            writePng((fs::path(dir) / (stem + ".png")).string(), out.srgb);
            writePng((fs::path(dir) / (stem + "_normal.png")).string(), encodeNormals(out.normal));
            writePng((fs::path(dir) / (stem + "_opacity.png")).string(), gray(out.opacity));
            files.push_back("./" + stem);
            normals.push_back("./" + stem + "_normal");
            opacities.push_back("./" + stem + "_opacity");
        }
        writeTransforms(dir, split, angleX, files, poses, normals, opacities);
        logInfo("wrote " + std::to_string(count) + " " + split + " views");
    }
    writePfm((fs::path(dir) / "env.pfm").string(), environmentToImage(env));
}

}  // namespace nmf
