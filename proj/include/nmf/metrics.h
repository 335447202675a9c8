// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nmf/image_io.h>

namespace nmf {

inline constexpr double kPsnrCap = 99.0;

double meanSquaredError(const Image& a, const Image& b);
/// 10 log10(1 / MSE) for images in [0,1]; 99 dB when identical.
double psnr(const Image& a, const Image& b);
double psnrFromMse(double mse);
/// Mean SSIM over pixels and channels: 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1. Windows are truncated at borders.
double ssim(const Image& a, const Image& b);

/// Opacity-weighted mean angular error in degrees between normal maps.
/// Pixels where the ground truth is opaque (>= 0.5) but the prediction is not
/// count as 90 degrees. Weights are the ground-truth opacity.
double maeNormals(const Image& pred, const Image& gt, const Image& gtOpacity, const Image* predOpacity = nullptr);

}  // namespace nmf
