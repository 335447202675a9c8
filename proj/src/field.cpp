// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/field.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace nmf {

namespace {

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void fillUniform(std::vector<double>& v, std::mt19937_64& rng, double scale) {
    for (double& x : v) x = (2.0 * uniform01(rng) - 1.0) * scale;
}

// Linear resampling of a 1D or 2D lattice (align-corners convention).
double lerpCoord(int i, int oldRes, int newRes) {
    return newRes == 1 ? 0.0 : static_cast<double>(i) * (oldRes - 1) / (newRes - 1);
}

void splitCoord(double u, int res, int& i0, double& f) {
    i0 = std::clamp(static_cast<int>(std::floor(u)), 0, res - 2);
    f = u - i0;
}

}  // namespace

NormalKernel NormalKernel::gaussian(double sigma) {
    const double side = std::exp(-1.0 / (2.0 * sigma * sigma));
    const double sum = 1.0 + 2.0 * side;
    return NormalKernel{{side / sum, 1.0 / sum, side / sum}};
}

std::array<int, 3> FactorGrid::modeAxes(int m) {
    static constexpr std::array<std::array<int, 3>, 3> kAxes{{{0, 1, 2}, {0, 2, 1}, {1, 2, 0}}};
    return kAxes[m];
}

FactorGrid::FactorGrid(const GridShape& shape) : shape_(shape) {
    const auto& res = shape.resolution;
    for (int a = 0; a < 3; ++a)
        if (res[a] < 2) throw Error("grid resolution must be at least 2 on every axis");
    if (shape.densityRank < 1 || shape.featureRank < 1) throw Error("grid ranks must be at least 1");
    if (shape.featureDim < 0) throw Error("feature dimension must be nonnegative");
    for (int m = 0; m < 3; ++m) {
        const auto ax = modeAxes(m);
        const size_t plane = static_cast<size_t>(res[ax[0]]) * res[ax[1]];
        densityPlanes[m].assign(plane * shape.densityRank, 0.0);
        densityLines[m].assign(static_cast<size_t>(res[ax[2]]) * shape.densityRank, 0.0);
        featurePlanes[m].assign(plane * shape.featureRank, 0.0);
        featureLines[m].assign(static_cast<size_t>(res[ax[2]]) * shape.featureRank, 0.0);
    }
    basis.assign(static_cast<size_t>(shape.featureDim) * 3 * shape.featureRank, 0.0);
}

FactorGrid FactorGrid::random(const GridShape& shape, uint64_t seed, double scale) {
    FactorGrid g(shape);
    std::mt19937_64 rng(seed);
    for (int m = 0; m < 3; ++m) {
        fillUniform(g.densityPlanes[m], rng, scale);
        fillUniform(g.densityLines[m], rng, scale);
        fillUniform(g.featurePlanes[m], rng, scale);
        fillUniform(g.featureLines[m], rng, scale);
    }
    fillUniform(g.basis, rng, 1.0 / std::sqrt(3.0 * shape.featureRank));
    return g;
}

Vec3d FactorGrid::spacing() const {
    const Vec3d e = shape_.bounds.extent();
    const auto& r = shape_.resolution;
    return {e.x / (r[0] - 1), e.y / (r[1] - 1), e.z / (r[2] - 1)};
}

void FactorGrid::setZero() {
    for (int m = 0; m < 3; ++m) {
        std::fill(densityPlanes[m].begin(), densityPlanes[m].end(), 0.0);
        std::fill(densityLines[m].begin(), densityLines[m].end(), 0.0);
        std::fill(featurePlanes[m].begin(), featurePlanes[m].end(), 0.0);
        std::fill(featureLines[m].begin(), featureLines[m].end(), 0.0);
    }
    std::fill(basis.begin(), basis.end(), 0.0);
}

// Per-axis lattice cell and fractional offset of a query point.
struct FactorGrid::Interp {
    std::array<int, 3> i0;
    std::array<double, 3> f;
};

FactorGrid::Interp FactorGrid::locate(const Vec3d& p) const {
    Interp it;
    const auto& b = shape_.bounds;
    for (int a = 0; a < 3; ++a) {
        const double u = (p[a] - b.lo[a]) / (b.hi[a] - b.lo[a]) * (shape_.resolution[a] - 1);
        splitCoord(u, shape_.resolution[a], it.i0[a], it.f[a]);
    }
    return it;
}

double FactorGrid::rawDensity(const Vec3d& p) const {
    const Interp it = locate(p);
    const int rank = shape_.densityRank;
    double raw = 0.0;
    for (int m = 0; m < 3; ++m) {
        const auto [a, b, c] = modeAxes(m);
        const int resB = shape_.resolution[b];
        const double fa = it.f[a], fb = it.f[b], fc = it.f[c];
        const double* p00 = &densityPlanes[m][(static_cast<size_t>(it.i0[a]) * resB + it.i0[b]) * rank];
        const double* p01 = p00 + rank;
        const double* p10 = p00 + static_cast<size_t>(resB) * rank;
        const double* p11 = p10 + rank;
        const double* l0 = &densityLines[m][static_cast<size_t>(it.i0[c]) * rank];
        const double* l1 = l0 + rank;
        const double w00 = (1 - fa) * (1 - fb), w01 = (1 - fa) * fb, w10 = fa * (1 - fb), w11 = fa * fb;
        for (int r = 0; r < rank; ++r) {
            const double plane = w00 * p00[r] + w01 * p01[r] + w10 * p10[r] + w11 * p11[r];
            const double line = (1 - fc) * l0[r] + fc * l1[r];
            raw += plane * line;
        }
    }
    return raw;
}

double FactorGrid::density(const Vec3d& p) const {
    if (!shape_.bounds.contains(p)) return 0.0;
    return softplus(rawDensity(p));
}

void FactorGrid::feature(const Vec3d& p, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    if (!shape_.bounds.contains(p)) return;
    const Interp it = locate(p);
    const int rank = shape_.featureRank;
    const int comps = 3 * rank;
    std::vector<double> comp(comps);
    for (int m = 0; m < 3; ++m) {
        const auto [a, b, c] = modeAxes(m);
        const int resB = shape_.resolution[b];
        const double fa = it.f[a], fb = it.f[b], fc = it.f[c];
        const double* p00 = &featurePlanes[m][(static_cast<size_t>(it.i0[a]) * resB + it.i0[b]) * rank];
        const double* p01 = p00 + rank;
        const double* p10 = p00 + static_cast<size_t>(resB) * rank;
        const double* p11 = p10 + rank;
        const double* l0 = &featureLines[m][static_cast<size_t>(it.i0[c]) * rank];
        const double* l1 = l0 + rank;
        const double w00 = (1 - fa) * (1 - fb), w01 = (1 - fa) * fb, w10 = fa * (1 - fb), w11 = fa * fb;
        for (int r = 0; r < rank; ++r) {
            const double plane = w00 * p00[r] + w01 * p01[r] + w10 * p10[r] + w11 * p11[r];
            comp[m * rank + r] = plane * ((1 - fc) * l0[r] + fc * l1[r]);
        }
    }
    for (int k = 0; k < shape_.featureDim; ++k) {
        const double* row = &basis[static_cast<size_t>(k) * comps];
        double s = 0.0;
        for (int j = 0; j < comps; ++j) s += row[j] * comp[j];
        out[k] = s;
    }
}

std::vector<double> FactorGrid::feature(const Vec3d& p) const {
    std::vector<double> out(shape_.featureDim);
    feature(p, out);
    return out;
}

double FactorGrid::rawDensityAtLattice(int i, int j, int k) const {
    const std::array<int, 3> idx{std::clamp(i, 0, shape_.resolution[0] - 1),
                                 std::clamp(j, 0, shape_.resolution[1] - 1),
                                 std::clamp(k, 0, shape_.resolution[2] - 1)};
    const int rank = shape_.densityRank;
    double raw = 0.0;
    for (int m = 0; m < 3; ++m) {
        const auto [a, b, c] = modeAxes(m);
        const double* plane =
            &densityPlanes[m][(static_cast<size_t>(idx[a]) * shape_.resolution[b] + idx[b]) * rank];
        const double* line = &densityLines[m][static_cast<size_t>(idx[c]) * rank];
        for (int r = 0; r < rank; ++r) raw += plane[r] * line[r];
    }
    return raw;
}

namespace {

// Coefficients of the smoothed-difference stencil for one 4x4x4 neighborhood:
// gradient component `axis` at corner (ci, cj, ck) in {0,1}^3 is
// sum_q coeff[q] * sigma[q] over the 64 lattice points of the neighborhood
// that starts one cell below the query cell.
template <typename Visit>
void forEachStencilTap(const NormalKernel& k, const Vec3d& invTwoH, Visit&& visit) {
    for (int ci = 0; ci < 2; ++ci)
        for (int cj = 0; cj < 2; ++cj)
            for (int ck = 0; ck < 2; ++ck) {
                const int corner = (ci * 2 + cj) * 2 + ck;
                const std::array<int, 3> c{ci + 1, cj + 1, ck + 1};
                for (int axis = 0; axis < 3; ++axis) {
                    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
                    for (int ou = -1; ou <= 1; ++ou)
                        for (int ov = -1; ov <= 1; ++ov) {
                            const double w = k.taps[ou + 1] * k.taps[ov + 1] * invTwoH[axis];
                            for (int s = -1; s <= 1; s += 2) {
                                std::array<int, 3> q = c;
                                q[axis] += s;
                                q[u] += ou;
                                q[v] += ov;
                                visit(corner, axis, (q[0] * 4 + q[1]) * 4 + q[2], s * w);
                            }
                        }
                }
            }
}

}  // namespace

Vec3d FactorGrid::densityGradient(const Vec3d& p, const NormalKernel& kernel) const {
    if (!shape_.bounds.contains(p)) throw Error("normal query outside the grid bounds");
    const Interp it = locate(p);
    std::array<double, 64> sigma;
    for (int q = 0; q < 64; ++q)
        sigma[q] = softplus(rawDensityAtLattice(it.i0[0] - 1 + q / 16, it.i0[1] - 1 + (q / 4) % 4,
                                                it.i0[2] - 1 + q % 4));
    const Vec3d h = spacing();
    const Vec3d invTwoH{0.5 / h.x, 0.5 / h.y, 0.5 / h.z};
    std::array<Vec3d, 8> cornerGrad{};
    forEachStencilTap(kernel, invTwoH,
                      [&](int corner, int axis, int q, double w) { cornerGrad[corner][axis] += w * sigma[q]; });
    Vec3d g{};
    for (int corner = 0; corner < 8; ++corner) {
        const double wx = (corner & 4) ? it.f[0] : 1 - it.f[0];
        const double wy = (corner & 2) ? it.f[1] : 1 - it.f[1];
        const double wz = (corner & 1) ? it.f[2] : 1 - it.f[2];
        g += cornerGrad[corner] * (wx * wy * wz);
    }
    return g;
}

NormalResult FactorGrid::normalAt(const Vec3d& p, const NormalKernel& kernel) const {
    NormalResult r;
    r.gradient = densityGradient(p, kernel);
    const double len = length(r.gradient);
    if (len < 1e-12) return r;
    r.normal = -r.gradient / len;
    r.valid = true;
    return r;
}

void FactorGrid::accumulateRawDensity(const Vec3d& p, double dRaw, FactorGrid& grad) const {
    if (dRaw == 0.0) return;
    const Interp it = locate(p);
    const int rank = shape_.densityRank;
    for (int m = 0; m < 3; ++m) {
        const auto [a, b, c] = modeAxes(m);
        const int resB = shape_.resolution[b];
        const double fa = it.f[a], fb = it.f[b], fc = it.f[c];
        const size_t o00 = (static_cast<size_t>(it.i0[a]) * resB + it.i0[b]) * rank;
        const size_t o01 = o00 + rank, o10 = o00 + static_cast<size_t>(resB) * rank, o11 = o10 + rank;
        const size_t l0 = static_cast<size_t>(it.i0[c]) * rank, l1 = l0 + rank;
        const double w00 = (1 - fa) * (1 - fb), w01 = (1 - fa) * fb, w10 = fa * (1 - fb), w11 = fa * fb;
        const auto& P = densityPlanes[m];
        const auto& L = densityLines[m];
        auto& gP = grad.densityPlanes[m];
        auto& gL = grad.densityLines[m];
        for (int r = 0; r < rank; ++r) {
            const double plane = w00 * P[o00 + r] + w01 * P[o01 + r] + w10 * P[o10 + r] + w11 * P[o11 + r];
            const double line = (1 - fc) * L[l0 + r] + fc * L[l1 + r];
            const double dPlane = dRaw * line, dLine = dRaw * plane;
            gP[o00 + r] += w00 * dPlane;
            gP[o01 + r] += w01 * dPlane;
            gP[o10 + r] += w10 * dPlane;
            gP[o11 + r] += w11 * dPlane;
            gL[l0 + r] += (1 - fc) * dLine;
            gL[l1 + r] += fc * dLine;
        }
    }
}

void FactorGrid::accumulateFeature(const Vec3d& p, std::span<const double> dFeature, FactorGrid& grad) const {
    if (!shape_.bounds.contains(p)) return;
    const Interp it = locate(p);
    const int rank = shape_.featureRank;
    const int comps = 3 * rank;
    std::vector<double> plane(comps), line(comps), dComp(comps, 0.0);
    std::array<std::array<size_t, 6>, 3> offs;
    std::array<std::array<double, 6>, 3> wts;
    for (int m = 0; m < 3; ++m) {
        const auto [a, b, c] = modeAxes(m);
        const int resB = shape_.resolution[b];
        const double fa = it.f[a], fb = it.f[b], fc = it.f[c];
        const size_t o00 = (static_cast<size_t>(it.i0[a]) * resB + it.i0[b]) * rank;
        offs[m] = {o00, o00 + rank, o00 + static_cast<size_t>(resB) * rank,
                   o00 + static_cast<size_t>(resB) * rank + rank, static_cast<size_t>(it.i0[c]) * rank,
                   static_cast<size_t>(it.i0[c] + 1) * rank};
        wts[m] = {(1 - fa) * (1 - fb), (1 - fa) * fb, fa * (1 - fb), fa * fb, 1 - fc, fc};
        const auto& P = featurePlanes[m];
        const auto& L = featureLines[m];
        for (int r = 0; r < rank; ++r) {
            plane[m * rank + r] = wts[m][0] * P[offs[m][0] + r] + wts[m][1] * P[offs[m][1] + r] +
                                  wts[m][2] * P[offs[m][2] + r] + wts[m][3] * P[offs[m][3] + r];
            line[m * rank + r] = wts[m][4] * L[offs[m][4] + r] + wts[m][5] * L[offs[m][5] + r];
        }
    }
    for (int k = 0; k < shape_.featureDim; ++k) {
        const double d = dFeature[k];
        if (d == 0.0) continue;
        const double* row = &basis[static_cast<size_t>(k) * comps];
        double* gRow = &grad.basis[static_cast<size_t>(k) * comps];
        for (int j = 0; j < comps; ++j) {
            gRow[j] += d * plane[j] * line[j];
            dComp[j] += d * row[j];
        }
    }
    for (int m = 0; m < 3; ++m) {
        auto& gP = grad.featurePlanes[m];
        auto& gL = grad.featureLines[m];
        for (int r = 0; r < rank; ++r) {
            const int j = m * rank + r;
            const double dPlane = dComp[j] * line[j], dLine = dComp[j] * plane[j];
            for (int t = 0; t < 4; ++t) gP[offs[m][t] + r] += wts[m][t] * dPlane;
            gL[offs[m][4] + r] += wts[m][4] * dLine;
            gL[offs[m][5] + r] += wts[m][5] * dLine;
        }
    }
}

void FactorGrid::accumulateDensityGradient(const Vec3d& p, const Vec3d& dGradient, FactorGrid& grad,
                                           const NormalKernel& kernel) const {
    const Interp it = locate(p);
    const Vec3d h = spacing();
    const Vec3d invTwoH{0.5 / h.x, 0.5 / h.y, 0.5 / h.z};
    std::array<double, 8> cornerW;
    for (int corner = 0; corner < 8; ++corner) {
        const double wx = (corner & 4) ? it.f[0] : 1 - it.f[0];
        const double wy = (corner & 2) ? it.f[1] : 1 - it.f[1];
        const double wz = (corner & 1) ? it.f[2] : 1 - it.f[2];
        cornerW[corner] = wx * wy * wz;
    }
    std::array<double, 64> dSigma{};
    forEachStencilTap(kernel, invTwoH, [&](int corner, int axis, int q, double w) {
        dSigma[q] += cornerW[corner] * w * dGradient[axis];
    });
    const int rank = shape_.densityRank;
    for (int q = 0; q < 64; ++q) {
        if (dSigma[q] == 0.0) continue;
        const std::array<int, 3> idx{std::clamp(it.i0[0] - 1 + q / 16, 0, shape_.resolution[0] - 1),
                                     std::clamp(it.i0[1] - 1 + (q / 4) % 4, 0, shape_.resolution[1] - 1),
                                     std::clamp(it.i0[2] - 1 + q % 4, 0, shape_.resolution[2] - 1)};
        const double dRaw = dSigma[q] * sigmoid(rawDensityAtLattice(idx[0], idx[1], idx[2]));
        for (int m = 0; m < 3; ++m) {
            const auto [a, b, c] = modeAxes(m);
            const size_t po = (static_cast<size_t>(idx[a]) * shape_.resolution[b] + idx[b]) * rank;
            const size_t lo = static_cast<size_t>(idx[c]) * rank;
            for (int r = 0; r < rank; ++r) {
                grad.densityPlanes[m][po + r] += dRaw * densityLines[m][lo + r];
                grad.densityLines[m][lo + r] += dRaw * densityPlanes[m][po + r];
            }
        }
    }
}

FactorGrid FactorGrid::upsampled(const std::array<int, 3>& newRes) const {
    for (int a = 0; a < 3; ++a)
        if (newRes[a] < shape_.resolution[a]) throw Error("upsample: new resolution is smaller than current");
    GridShape s = shape_;
    s.resolution = newRes;
    FactorGrid out(s);
    const auto& oldRes = shape_.resolution;
    auto resamplePlane = [&](const std::vector<double>& src, std::vector<double>& dst, int m, int rank) {
        const auto [a, b, c] = modeAxes(m);
        (void)c;
        for (int i = 0; i < newRes[a]; ++i) {
            int i0;
            double fi;
            splitCoord(lerpCoord(i, oldRes[a], newRes[a]), oldRes[a], i0, fi);
            for (int j = 0; j < newRes[b]; ++j) {
                int j0;
                double fj;
                splitCoord(lerpCoord(j, oldRes[b], newRes[b]), oldRes[b], j0, fj);
                const double* s00 = &src[(static_cast<size_t>(i0) * oldRes[b] + j0) * rank];
                const double* s01 = s00 + rank;
                const double* s10 = s00 + static_cast<size_t>(oldRes[b]) * rank;
                const double* s11 = s10 + rank;
                double* d = &dst[(static_cast<size_t>(i) * newRes[b] + j) * rank];
                for (int r = 0; r < rank; ++r)
                    d[r] = (1 - fi) * ((1 - fj) * s00[r] + fj * s01[r]) + fi * ((1 - fj) * s10[r] + fj * s11[r]);
            }
        }
    };
    auto resampleLine = [&](const std::vector<double>& src, std::vector<double>& dst, int m, int rank) {
        const int c = modeAxes(m)[2];
        for (int k = 0; k < newRes[c]; ++k) {
            int k0;
            double fk;
            splitCoord(lerpCoord(k, oldRes[c], newRes[c]), oldRes[c], k0, fk);
            for (int r = 0; r < rank; ++r)
                dst[static_cast<size_t>(k) * rank + r] =
                    (1 - fk) * src[static_cast<size_t>(k0) * rank + r] + fk * src[static_cast<size_t>(k0 + 1) * rank + r];
        }
    };
    for (int m = 0; m < 3; ++m) {
        resamplePlane(densityPlanes[m], out.densityPlanes[m], m, s.densityRank);
        resampleLine(densityLines[m], out.densityLines[m], m, s.densityRank);
        resamplePlane(featurePlanes[m], out.featurePlanes[m], m, s.featureRank);
        resampleLine(featureLines[m], out.featureLines[m], m, s.featureRank);
    }
    out.basis = basis;
    return out;
}

ParamList FactorGrid::params() {
    static const char* kModes[3] = {"xy_z", "xz_y", "yz_x"};
    ParamList list;
    for (int m = 0; m < 3; ++m) {
        list.push_back({std::string("grid.density.plane.") + kModes[m], ParamGroup::Grid, densityPlanes[m]});
        list.push_back({std::string("grid.density.line.") + kModes[m], ParamGroup::Grid, densityLines[m]});
    }
    for (int m = 0; m < 3; ++m) {
        list.push_back({std::string("grid.feature.plane.") + kModes[m], ParamGroup::Grid, featurePlanes[m]});
        list.push_back({std::string("grid.feature.line.") + kModes[m], ParamGroup::Grid, featureLines[m]});
    }
    list.push_back({"grid.feature.basis", ParamGroup::Network, basis});
    return list;
}

double FactorGrid::squaredNorm() const {
    double s = 0.0;
    auto add = [&](const std::vector<double>& v) {
        for (double x : v) s += x * x;
    };
    for (int m = 0; m < 3; ++m) {
        add(densityPlanes[m]);
        add(densityLines[m]);
        add(featurePlanes[m]);
        add(featureLines[m]);
    }
    add(basis);
    return s;
}

bool FactorGrid::allFinite() const {
    auto ok = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    for (int m = 0; m < 3; ++m)
        if (!ok(densityPlanes[m]) || !ok(densityLines[m]) || !ok(featurePlanes[m]) || !ok(featureLines[m]))
            return false;
    return ok(basis);
}

int scheduledResolution(int start, int end, int event, int numEvents) {
    if (numEvents <= 0) return end;
    const double t = static_cast<double>(std::clamp(event, 0, numEvents)) / numEvents;
    return static_cast<int>(std::lround(start + (end - start) * t));
}

// --- tracked lookups -------------------------------------------------------

namespace {

void densityBackward(ad::Tape& tape, const ad::CustomOp& op) {
    const auto* grid = static_cast<const FactorGrid*>(op.self);
    auto* grad = static_cast<FactorGrid*>(op.grad);
    grid->accumulateRawDensity(op.point, tape.adjoint(op.firstOutput), *grad);
}

void featureBackward(ad::Tape& tape, const ad::CustomOp& op) {
    const auto* grid = static_cast<const FactorGrid*>(op.self);
    auto* grad = static_cast<FactorGrid*>(op.grad);
    std::vector<double> d(op.numOutputs);
    bool any = false;
    for (uint32_t k = 0; k < op.numOutputs; ++k) {
        d[k] = tape.adjoint(op.firstOutput + k);
        any = any || d[k] != 0.0;
    }
    if (any) grid->accumulateFeature(op.point, d, *grad);
}

void densityGradientBackward(ad::Tape& tape, const ad::CustomOp& op) {
    const auto* grid = static_cast<const FactorGrid*>(op.self);
    auto* grad = static_cast<FactorGrid*>(op.grad);
    const Vec3d d{tape.adjoint(op.firstOutput), tape.adjoint(op.firstOutput + 1), tape.adjoint(op.firstOutput + 2)};
    if (d.x == 0.0 && d.y == 0.0 && d.z == 0.0) return;
    const double side = op.aux;
    grid->accumulateDensityGradient(op.point, d, *grad, NormalKernel{{side, 1.0 - 2.0 * side, side}});
}

}  // namespace

Var trackedDensity(const FactorGrid& grid, FactorGrid* grad, const Vec3d& p) {
    if (!grid.bounds().contains(p)) return Var(0.0);
    const double raw = grid.rawDensity(p);
    ad::Tape* tape = ad::Tape::current();
    if (!tape || !grad) return Var(softplus(raw));
    ad::CustomOp& op = tape->custom(1, {}, {});
    op.backward = densityBackward;
    op.self = &grid;
    op.grad = grad;
    op.point = p;
    return softplus(Var(raw, op.firstOutput));
}

std::vector<Var> trackedFeature(const FactorGrid& grid, FactorGrid* grad, const Vec3d& p) {
    const std::vector<double> x = grid.feature(p);
    std::vector<Var> out(x.begin(), x.end());
    ad::Tape* tape = ad::Tape::current();
    if (!tape || !grad || !grid.bounds().contains(p) || x.empty()) return out;
    ad::CustomOp& op = tape->custom(static_cast<uint32_t>(x.size()), {}, {});
    op.backward = featureBackward;
    op.self = &grid;
    op.grad = grad;
    op.point = p;
    for (size_t k = 0; k < x.size(); ++k) out[k] = Var(x[k], op.firstOutput + static_cast<uint32_t>(k));
    return out;
}

Vec3<Var> trackedDensityGradient(const FactorGrid& grid, FactorGrid* grad, const Vec3d& p,
                                 const NormalKernel& kernel) {
    const Vec3d g = grid.densityGradient(p, kernel);
    ad::Tape* tape = ad::Tape::current();
    if (!tape || !grad) return Vec3<Var>(g);
    ad::CustomOp& op = tape->custom(3, {}, {});
    op.backward = densityGradientBackward;
    op.self = &grid;
    op.grad = grad;
    op.point = p;
    op.aux = kernel.taps[0];
    return {Var(g.x, op.firstOutput), Var(g.y, op.firstOutput + 1), Var(g.z, op.firstOutput + 2)};
}

}  // namespace nmf
