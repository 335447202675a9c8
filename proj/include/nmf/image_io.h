// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nmf/envlight.h>

#include <string>
#include <vector>

namespace nmf {

/// Image of float channels, row-major with (0,0) at the top left.
struct Image {
    int width = 0, height = 0, channels = 3;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, int c = 3) : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, 0.0f) {}
    float& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
    float at(int x, int y, int c) const { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
};

/// 8-bit PNG (gray, gray+alpha, RGB or RGBA) scaled to [0,1].
Image readPng(const std::string& path);
/// Writes 1, 3 or 4 channels as 8-bit; values are clipped to [0,1] and rounded.
void writePng(const std::string& path, const Image& img);

/// Portable float map, 3 channels ("PF"), little-endian, rows stored bottom-up.
Image readPfm(const std::string& path);
void writePfm(const std::string& path, const Image& img);

/// Unit normals (or zeros) encoded as n * 0.5 + 0.5.
Image encodeNormals(const Image& normals);
Image decodeNormals(const Image& encoded);

EnvironmentMap environmentFromImage(const Image& img);
Image environmentToImage(const EnvironmentMap& env);

}  // namespace nmf
