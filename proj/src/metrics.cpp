// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/metrics.h>

#include <algorithm>
#include <cmath>

namespace nmf {

namespace {

void requireSameShape(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw Error("image shapes differ (" + std::to_string(a.width) + "x" + std::to_string(a.height) + "x" +
                    std::to_string(a.channels) + " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) +
                    "x" + std::to_string(b.channels) + ")");
}

}  // namespace

double meanSquaredError(const Image& a, const Image& b) {
    requireSameShape(a, b);
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        s += d * d;
    }
    return a.data.empty() ? 0.0 : s / static_cast<double>(a.data.size());
}

double psnrFromMse(double mse) {
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double psnr(const Image& a, const Image& b) { return psnrFromMse(meanSquaredError(a, b)); }

double ssim(const Image& a, const Image& b) {
    requireSameShape(a, b);
    constexpr int kRadius = 5;
    constexpr double kSigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double taps[2 * kRadius + 1];
    for (int i = -kRadius; i <= kRadius; ++i) taps[i + kRadius] = std::exp(-0.5 * i * i / (kSigma * kSigma));

    const int w = a.width, h = a.height;
    double total = 0.0;
    for (int c = 0; c < a.channels; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double sw = 0, ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int dy = -kRadius; dy <= kRadius; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= h) continue;
                    for (int dx = -kRadius; dx <= kRadius; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= w) continue;
                        const double k = taps[dy + kRadius] * taps[dx + kRadius];
                        const double va = a.at(xx, yy, c), vb = b.at(xx, yy, c);
                        sw += k;
                        ma += k * va;
                        mb += k * vb;
                        saa += k * va * va;
                        sbb += k * vb * vb;
                        sab += k * va * vb;
                    }
                }
                ma /= sw, mb /= sw;
                const double va = saa / sw - ma * ma, vb = sbb / sw - mb * mb, cov = sab / sw - ma * mb;
                total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
    return total / (static_cast<double>(w) * h * a.channels);
}

double maeNormals(const Image& pred, const Image& gt, const Image& gtOpacity, const Image* predOpacity) {
    requireSameShape(pred, gt);
    if (gtOpacity.width != gt.width || gtOpacity.height != gt.height) throw Error("opacity shape differs from normals");
    double sum = 0.0, weight = 0.0;
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            const double op = gtOpacity.at(x, y, 0);
            if (op <= 0.0) continue;
            const Vec3d p{pred.at(x, y, 0), pred.at(x, y, 1), pred.at(x, y, 2)};
            const Vec3d g{gt.at(x, y, 0), gt.at(x, y, 1), gt.at(x, y, 2)};
            const bool missing = lengthSquared(p) < 1e-12 || (predOpacity && predOpacity->at(x, y, 0) < 0.5);
            double err;
            if (missing && op >= 0.5) {
                err = 90.0;
            } else if (lengthSquared(p) < 1e-12 || lengthSquared(g) < 1e-12) {
                continue;
            } else {
                err = std::acos(std::clamp(dot(normalize(p), normalize(g)), -1.0, 1.0)) * 180.0 / kPi;
            }
            sum += op * err;
            weight += op;
        }
    return weight > 0.0 ? sum / weight : 0.0;
}

}  // namespace nmf
