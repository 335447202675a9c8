// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic sample generation: 32-bit Sobol points with hash-based
// nested uniform (Owen) scrambling, Cranley-Patterson rotation, per-sample
// stream allocation, and visible-normal sampling of the Trowbridge-Reitz
// distribution.
//
// Hashing, exactly as implemented (so renders reproduce across machines):
//   mix64(x):  splitmix64 finalizer
//              x ^= x >> 30; x *= 0xbf58476d1ce4e5b9;
//              x ^= x >> 27; x *= 0x94d049bb133111eb; x ^= x >> 31
//   dimension seed:  uint32(mix64(seed ^ mix64(dim + 0x9e3779b97f4a7c15)))
//   scramble(v, s):  reverse bits, then
//              v += s; v ^= v * 0x6c50b47c; v ^= v * 0xb82f1e52;
//              v ^= v * 0xc7afe638; v ^= v * 0x8d22f6e6
//              and reverse bits again
//   offsets:   hashUniform(seed, id, key) = top 53 bits of
//              mix64(mix64(mix64(seed) ^ id) ^ key) scaled to [0,1)

#pragma once

#include <nmf/materials.h>
#include <nmf/vec.h>

#include <cstdint>
#include <vector>

namespace nmf::qmc {

inline constexpr int kMaxDimensions = 64;

uint64_t mix64(uint64_t x);
/// Uniform [0,1) value from a hash of three keys.
double hashUniform(uint64_t seed, uint64_t id, uint64_t key);

/// Unscrambled Sobol point as a 32-bit fraction (index in natural order).
uint32_t sobolBits(uint32_t index, int dim);
/// Hash-based nested uniform scramble of a 32-bit fraction.
uint32_t owenScramble(uint32_t bits, uint32_t seed);
/// Owen-scrambled Sobol coordinate in [0,1).
double sobolOwen(uint32_t index, int dim, uint64_t seed);
/// (u + offset) mod 1, always in [0,1).
double cpRotate(double u, double offset);

struct Point2 {
    double u = 0.0, v = 0.0;
};

/// Sample stream shared by a render: the scramble seed. Per-sample
/// Cranley-Patterson offsets are derived by hashing the sample id.
struct SampleStream {
    uint64_t seed = 0;
};

/// The first n points of the 2D sequence in dimensions (2*bounce, 2*bounce+1),
/// rotated by offsets hashed from (primaryId, bounce).
std::vector<Point2> allocate(uint64_t primaryId, int bounce, int n, const SampleStream& stream);

struct VndfSample {
    Vec3d h;            // local frame, normal = +z
    double pdf = 0.0;   // solid-angle density of h
};

/// Visible-normal sample for a view direction in the local frame (z > 0).
VndfSample sampleVndf(double u1, double u2, const Vec3d& woLocal, double alpha);

/// D_wo(h) = G1(wo) max(0, wo.h) D(h) / (wo.n); zero for degenerate dot products.
/// The normal may be tracked; h and wo are sampling decisions.
template <typename T, typename N>
T vndfPdf(const Vec3d& h, const Vec3d& wo, const Vec3<N>& n, const T& alpha) {
    const N cosHN = dot(Vec3<N>(h), n), cosON = dot(Vec3<N>(wo), n);
    const double cosOH = dot(wo, h);
    if (value(cosHN) <= 0.0 || value(cosON) <= 0.0 || cosOH <= 0.0) return T(0.0);
    return smithG1(cosON, alpha) * trDistribution(cosHN, alpha) * (cosOH / cosON);
}

struct Reflection {
    Vec3d wi;
    double jacobian = 0.0;  // |d wi / d h| = 4 (wo . h)
};

Reflection reflect(const Vec3d& wo, const Vec3d& h);

}  // namespace nmf::qmc
