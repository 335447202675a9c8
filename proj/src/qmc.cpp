// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/qmc.h>

#include <array>
#include <bit>

namespace nmf::qmc {

namespace {

struct SobolRow {
    uint32_t poly;
    int degree;
    std::array<uint32_t, 10> m;
};

constexpr SobolRow kRows[kMaxDimensions] = {
#include "sobol_table.inc"
};

using DirectionTable = std::array<std::array<uint32_t, 32>, kMaxDimensions>;

DirectionTable buildDirections() {
    DirectionTable v{};
    for (int d = 0; d < kMaxDimensions; ++d) {
        const SobolRow& row = kRows[d];
        if (row.degree == 0) {
            for (int k = 0; k < 32; ++k) v[d][k] = 1u << (31 - k);
            continue;
        }
        const int s = row.degree;
        std::array<uint32_t, 32> m{};
        for (int k = 0; k < s; ++k) m[k] = row.m[k];
        for (int k = s; k < 32; ++k) {
            uint32_t x = m[k - s] ^ (m[k - s] << s);
            for (int j = 1; j < s; ++j)
                if ((row.poly >> (s - j)) & 1u) x ^= m[k - j] << j;
            m[k] = x;
        }
        for (int k = 0; k < 32; ++k) v[d][k] = m[k] << (31 - k);
    }
    return v;
}

const DirectionTable& directions() {
    static const DirectionTable table = buildDirections();
    return table;
}

uint32_t reverseBits(uint32_t x) {
    x = ((x >> 1) & 0x55555555u) | ((x & 0x55555555u) << 1);
    x = ((x >> 2) & 0x33333333u) | ((x & 0x33333333u) << 2);
    x = ((x >> 4) & 0x0f0f0f0fu) | ((x & 0x0f0f0f0fu) << 4);
    x = ((x >> 8) & 0x00ff00ffu) | ((x & 0x00ff00ffu) << 8);
    return (x >> 16) | (x << 16);
}

}  // namespace

uint64_t mix64(uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

double hashUniform(uint64_t seed, uint64_t id, uint64_t key) {
    const uint64_t h = mix64(mix64(mix64(seed) ^ id) ^ key);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

uint32_t sobolBits(uint32_t index, int dim) {
    if (dim < 0 || dim >= kMaxDimensions) throw Error("Sobol dimension out of range");
    const auto& v = directions()[dim];
    uint32_t x = 0;
    for (int k = 0; index; index >>= 1, ++k)
        if (index & 1u) x ^= v[k];
    return x;
}

uint32_t owenScramble(uint32_t bits, uint32_t seed) {
    uint32_t x = reverseBits(bits);
    x += seed;
    x ^= x * 0x6c50b47cu;
    x ^= x * 0xb82f1e52u;
    x ^= x * 0xc7afe638u;
    x ^= x * 0x8d22f6e6u;
    return reverseBits(x);
}

double sobolOwen(uint32_t index, int dim, uint64_t seed) {
    const auto dimSeed = static_cast<uint32_t>(mix64(seed ^ mix64(static_cast<uint64_t>(dim) + 0x9e3779b97f4a7c15ull)));
    return static_cast<double>(owenScramble(sobolBits(index, dim), dimSeed)) * 0x1.0p-32;
}

double cpRotate(double u, double offset) {
    double r = u + offset;
    if (r >= 1.0) r -= 1.0;
    return r < 1.0 ? r : 0.0;
}

std::vector<Point2> allocate(uint64_t primaryId, int bounce, int n, const SampleStream& stream) {
    std::vector<Point2> pts;
    if (n <= 0) return pts;
    const int d0 = 2 * bounce;
    if (d0 + 1 >= kMaxDimensions) throw Error("bounce exceeds the available Sobol dimensions");
    const double off0 = hashUniform(stream.seed, primaryId, static_cast<uint64_t>(d0));
    const double off1 = hashUniform(stream.seed, primaryId, static_cast<uint64_t>(d0 + 1));
    pts.reserve(n);
    for (int i = 0; i < n; ++i)
        pts.push_back({cpRotate(sobolOwen(static_cast<uint32_t>(i), d0, stream.seed), off0),
                       cpRotate(sobolOwen(static_cast<uint32_t>(i), d0 + 1, stream.seed), off1)});
    return pts;
}

VndfSample sampleVndf(double u1, double u2, const Vec3d& woLocal, double alpha) {
    if (woLocal.z <= 0.0) throw Error("visible-normal sampling needs a view direction above the surface");
    // Stretch the view direction to the unit-roughness configuration.
    const Vec3d vh = normalize(Vec3d{alpha * woLocal.x, alpha * woLocal.y, woLocal.z});
    const double lensq = vh.x * vh.x + vh.y * vh.y;
    const Vec3d t1 = lensq > 0 ? Vec3d{-vh.y, vh.x, 0.0} / std::sqrt(lensq) : Vec3d{1.0, 0.0, 0.0};
    const Vec3d t2 = cross(vh, t1);
    // Uniform disk sample, warped onto the visible projected half-disk.
    const double r = std::sqrt(u1);
    const double phi = 2.0 * kPi * u2;
    const double p1 = r * std::cos(phi);
    double p2 = r * std::sin(phi);
    const double s = 0.5 * (1.0 + vh.z);
    p2 = (1.0 - s) * std::sqrt(std::max(0.0, 1.0 - p1 * p1)) + s * p2;
    const Vec3d nh = t1 * p1 + t2 * p2 + vh * std::sqrt(std::max(0.0, 1.0 - p1 * p1 - p2 * p2));
    VndfSample out;
    out.h = normalize(Vec3d{alpha * nh.x, alpha * nh.y, std::max(1e-7, nh.z)});
    out.pdf = vndfPdf(out.h, woLocal, Vec3d{0, 0, 1}, alpha);
    return out;
}

Reflection reflect(const Vec3d& wo, const Vec3d& h) {
    const double c = dot(wo, h);
    return {h * (2.0 * c) - wo, 4.0 * c};
}

}  // namespace nmf::qmc
