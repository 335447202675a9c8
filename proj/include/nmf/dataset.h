// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nmf/image_io.h>
#include <nmf/render.h>

#include <optional>
#include <string>
#include <vector>

namespace nmf {

/// One posed view. Images are sRGB in [0,1] composited over white.
struct Frame {
    std::string imagePath;
    Mat4 pose;
    Image rgb;
    std::optional<Image> normals;  // unit vectors, zero where undefined
    std::optional<Image> opacity;  // one channel
};

struct SceneDataset {
    std::string split;
    double angleX = 0.0;
    std::vector<Frame> frames;

    int width() const { return frames.empty() ? 0 : frames.front().rgb.width; }
    int height() const { return frames.empty() ? 0 : frames.front().rgb.height; }
    Camera camera(size_t i) const;
};

/// Reads `<dir>/transforms_<split>.json` in the NeRF-Blender layout:
/// {"camera_angle_x": .., "frames": [{"file_path": .., "transform_matrix": 4x4}]}.
/// Optional per-frame "normal_path" and "opacity_path" point at ground truth.
/// RGBA images are composited over white. Rotation blocks deviating from
/// orthonormal by more than 1e-2 are re-orthonormalized with a warning.
SceneDataset loadScene(const std::string& dir, const std::string& split);

/// Writes the transforms file for already saved images (paths relative to dir).
void writeTransforms(const std::string& dir, const std::string& split, double angleX,
                     const std::vector<std::string>& files, const std::vector<Mat4>& poses,
                     const std::vector<std::string>& normalFiles = {},
                     const std::vector<std::string>& opacityFiles = {});

/// Camera-to-world pose at `eye` looking at `target` with +z up in the world.
Mat4 lookAt(const Vec3d& eye, const Vec3d& target, const Vec3d& up = {0.0, 0.0, 1.0});

}  // namespace nmf
