// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/envlight.h>

#include <algorithm>
#include <cmath>

namespace nmf {

namespace {

double wrapPhi(double phi) {
    double p = std::fmod(phi, 2.0 * kPi);
    if (p < 0.0) p += 2.0 * kPi;
    return p;
}

}  // namespace

// --- EnvironmentMap -----------------------------------------------------------

EnvironmentMap::EnvironmentMap(int height, int width, double radiance)
    : logValues(static_cast<size_t>(height) * width * 3, std::log(radiance)), height_(height), width_(width) {
    if (height < 4 || width < 4) throw Error("environment map must be at least 4x4");
    if (!(radiance > 0.0)) throw Error("environment radiance must be positive");
}

EnvironmentMap EnvironmentMap::fromRadiance(int height, int width, const std::vector<double>& rgb) {
    EnvironmentMap env(height, width);
    if (rgb.size() != env.logValues.size()) throw Error("environment map data has the wrong size");
    for (size_t i = 0; i < rgb.size(); ++i) {
        if (!(rgb[i] > 0.0) || !std::isfinite(rgb[i])) throw Error("environment radiance must be positive and finite");
        env.logValues[i] = std::log(rgb[i]);
    }
    return env;
}

Rgbd EnvironmentMap::radianceAtPixel(int row, int col) const {
    const size_t i = (static_cast<size_t>(row) * width_ + col) * 3;
    return {std::exp(logValues[i]), std::exp(logValues[i + 1]), std::exp(logValues[i + 2])};
}

std::array<int, 2> EnvironmentMap::pixelOf(double theta, double phi) const {
    const int row = std::clamp(static_cast<int>(std::floor(theta / kPi * height_)), 0, height_ - 1);
    const int col = std::clamp(static_cast<int>(std::floor(wrapPhi(phi) / (2.0 * kPi) * width_)), 0, width_ - 1);
    return {row, col};
}

Rgbd EnvironmentMap::radianceAt(double theta, double phi) const {
    const auto [r, c] = pixelOf(theta, phi);
    return radianceAtPixel(r, c);
}

Rgbd EnvironmentMap::radianceAt(const Vec3d& dir) const {
    double theta, phi;
    directionToSpherical(dir, theta, phi);
    return radianceAt(theta, phi);
}

std::vector<double> EnvironmentMap::radiance() const {
    std::vector<double> out(logValues.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(logValues[i]);
    return out;
}

EnvironmentMap EnvironmentMap::rotatedColumns(int columns) const {
    EnvironmentMap out = *this;
    for (int r = 0; r < height_; ++r)
        for (int c = 0; c < width_; ++c) {
            const int dst = ((c + columns) % width_ + width_) % width_;
            for (int k = 0; k < 3; ++k)
                out.logValues[(static_cast<size_t>(r) * width_ + dst) * 3 + k] =
                    logValues[(static_cast<size_t>(r) * width_ + c) * 3 + k];
        }
    return out;
}

EnvironmentMap EnvironmentMap::zerosLike() const {
    EnvironmentMap out = *this;
    std::fill(out.logValues.begin(), out.logValues.end(), 0.0);
    return out;
}

ParamList EnvironmentMap::params() { return {{"env.log_radiance", ParamGroup::Environment, logValues}}; }

bool EnvironmentMap::allFinite() const {
    return std::all_of(logValues.begin(), logValues.end(), [](double v) { return std::isfinite(v); });
}

// --- SummedAreaTable ------------------------------------------------------------

SummedAreaTable::SummedAreaTable(const EnvironmentMap& env)
    : sums(static_cast<size_t>(env.height() + 1) * (env.width() + 1) * 3, 0.0),
      height_(env.height()),
      width_(env.width()) {
    const int w1 = width_ + 1;
    for (int r = 0; r < height_; ++r) {
        double row[3] = {0.0, 0.0, 0.0};
        for (int c = 0; c < width_; ++c) {
            const Rgbd v = env.radianceAtPixel(r, c);
            row[0] += v.r;
            row[1] += v.g;
            row[2] += v.b;
            const size_t dst = (static_cast<size_t>(r + 1) * w1 + c + 1) * 3;
            const size_t above = (static_cast<size_t>(r) * w1 + c + 1) * 3;
            for (int k = 0; k < 3; ++k) sums[dst + k] = sums[above + k] + row[k];
        }
    }
}

Rgbd SummedAreaTable::at(int r, int c) const {
    const size_t i = (static_cast<size_t>(r) * (width_ + 1) + c) * 3;
    return {sums[i], sums[i + 1], sums[i + 2]};
}

namespace {

// Bilinear stencil of the integral image at a real (x, y): four table
// entries with weights, plus the partial derivatives' stencils.
struct Stencil {
    int r, c;       // lower corner in the table
    double fx, fy;  // fractions inside the cell
};

Stencil stencil(double x, double y, int height, int width) {
    Stencil s;
    s.c = std::clamp(static_cast<int>(std::floor(x)), 0, width - 1);
    s.r = std::clamp(static_cast<int>(std::floor(y)), 0, height - 1);
    s.fx = x - s.c;
    s.fy = y - s.r;
    return s;
}

struct CornerWeight {
    size_t index;  // first channel of the table entry
    double weight;
};

// Integral over a non-wrapping real rectangle along with the edge partials
// and (optionally) the linear weights on table entries.
struct RectIntegral {
    Rgbd value;
    Rgbd dx0, dx1, dy0, dy1;
};

RectIntegral integrateRect(const SummedAreaTable& sat, double x0, double x1, double y0, double y1, double scale,
                           std::vector<CornerWeight>* weights) {
    const int h = sat.height(), w = sat.width();
    RectIntegral out{Rgbd(0.0), Rgbd(0.0), Rgbd(0.0), Rgbd(0.0), Rgbd(0.0)};
    const double xs[2] = {x0, x1}, ys[2] = {y0, y1};
    for (int iy = 0; iy < 2; ++iy)
        for (int ix = 0; ix < 2; ++ix) {
            const double sign = (ix == iy) ? 1.0 : -1.0;
            const Stencil s = stencil(xs[ix], ys[iy], h, w);
            const Rgbd a = sat.at(s.r, s.c), b = sat.at(s.r, s.c + 1);
            const Rgbd c = sat.at(s.r + 1, s.c), d = sat.at(s.r + 1, s.c + 1);
            const Rgbd v = a * ((1 - s.fx) * (1 - s.fy)) + b * (s.fx * (1 - s.fy)) + c * ((1 - s.fx) * s.fy) +
                           d * (s.fx * s.fy);
            const Rgbd ddx = (b - a) * (1 - s.fy) + (d - c) * s.fy;
            const Rgbd ddy = (c - a) * (1 - s.fx) + (d - b) * s.fx;
            out.value += v * sign;
            (ix == 0 ? out.dx0 : out.dx1) += ddx * sign;
            (iy == 0 ? out.dy0 : out.dy1) += ddy * sign;
            if (weights) {
                const size_t w1 = static_cast<size_t>(w) + 1;
                const double k = sign * scale;
                weights->push_back({(s.r * w1 + s.c) * 3, k * (1 - s.fx) * (1 - s.fy)});
                weights->push_back({(s.r * w1 + s.c + 1) * 3, k * s.fx * (1 - s.fy)});
                weights->push_back({((s.r + 1) * w1 + s.c) * 3, k * (1 - s.fx) * s.fy});
                weights->push_back({((s.r + 1) * w1 + s.c + 1) * 3, k * s.fx * s.fy});
            }
        }
    return out;
}

struct MeanResult {
    Rgbd mean;
    Rgbd dHx, dHy;  // d(mean)/d(extent in pixels)
    std::vector<CornerWeight> weights;
};

// The rectangle mean in pixel units: center (xc, yc), extents (hx, hy).
MeanResult rectMean(const SummedAreaTable& sat, double xc, double yc, double hx, double hy, RectAlignment align,
                    bool wantWeights) {
    const int h = sat.height(), w = sat.width();
    bool xFixed = false, yFixed = false;
    if (hx < 1.0) hx = 1.0, xFixed = true;
    if (hy < 1.0) hy = 1.0, yFixed = true;
    double x0 = xc - 0.5 * hx, x1 = xc + 0.5 * hx;
    double y0 = yc - 0.5 * hy, y1 = yc + 0.5 * hy;
    bool y0Clamped = false, y1Clamped = false;
    if (y0 < 0.0) y0 = 0.0, y0Clamped = true;
    if (y1 > h) y1 = h, y1Clamped = true;
    bool fullRow = false;
    if (x1 - x0 >= w) x0 = 0.0, x1 = w, fullRow = true;
    if (align == RectAlignment::Outward) {
        x0 = std::floor(x0), x1 = std::ceil(x1);
        y0 = std::floor(y0), y1 = std::ceil(y1);
        if (x1 - x0 > w) x1 = x0 + w;
        xFixed = yFixed = true;
    }

    MeanResult out;
    const double area = (x1 - x0) * (y1 - y0);
    std::vector<CornerWeight>* weights = wantWeights ? &out.weights : nullptr;
    const double scale = 1.0 / area;
    RectIntegral total;
    Rgbd dx0, dx1;
    if (x0 < 0.0) {
        const RectIntegral a = integrateRect(sat, x0 + w, w, y0, y1, scale, weights);
        const RectIntegral b = integrateRect(sat, 0.0, x1, y0, y1, scale, weights);
        total = {a.value + b.value, a.dx0, b.dx1, a.dy0 + b.dy0, a.dy1 + b.dy1};
    } else if (x1 > w) {
        const RectIntegral a = integrateRect(sat, x0, w, y0, y1, scale, weights);
        const RectIntegral b = integrateRect(sat, 0.0, x1 - w, y0, y1, scale, weights);
        total = {a.value + b.value, a.dx0, b.dx1, a.dy0 + b.dy0, a.dy1 + b.dy1};
    } else {
        total = integrateRect(sat, x0, x1, y0, y1, scale, weights);
    }
    out.mean = total.value / area;

    // Extent partials. Edges move by +-1/2 per unit extent unless clamped.
    const Rgbd zero(0.0);
    if (xFixed || fullRow) {
        out.dHx = zero;
    } else {
        const Rgbd dI = (total.dx1 - total.dx0) * 0.5;
        out.dHx = (dI - out.mean * (y1 - y0)) / area;
    }
    if (yFixed || (y0Clamped && y1Clamped)) {
        out.dHy = zero;
    } else {
        const double e0 = y0Clamped ? 0.0 : 0.5, e1 = y1Clamped ? 0.0 : 0.5;
        const Rgbd dI = total.dy1 * e1 - total.dy0 * e0;
        out.dHy = (dI - out.mean * ((x1 - x0) * (e0 + e1))) / area;
    }
    return out;
}

void meanBackward(ad::Tape& tape, const ad::CustomOp& op) {
    auto* grad = static_cast<EnvGradient*>(op.grad);
    const auto s = tape.scratch(op.scratch, op.numScratch);
    const auto in = tape.indices(op.inputs, op.numInputs);
    // scratch: dMean/dTheta (3), dMean/dPhi (3), then (index, weight) pairs
    for (int k = 0; k < 3; ++k) {
        const double d = tape.adjoint(op.firstOutput + k);
        if (d == 0.0) continue;
        tape.addAdjoint(in[0], d * s[k]);
        tape.addAdjoint(in[1], d * s[3 + k]);
        if (!grad) continue;
        for (size_t i = 6; i + 1 < s.size(); i += 2)
            grad->sums[static_cast<size_t>(s[i]) + k] += d * s[i + 1];
    }
}

}  // namespace

Rgbd SummedAreaTable::integrate(double x0, double x1, double y0, double y1) const {
    return integrateRect(*this, x0, x1, y0, y1, 1.0, nullptr).value;
}

// --- rectangle sizing ---------------------------------------------------------------

RectSize rectSize(double pdf, double theta, int n, int height, int width) {
    RectSize out;
    lookupRect<double>(FootprintRule::Literal, pdf, theta, n, height, width, out.dTheta, out.dPhi);
    return out;
}

RectSize footprintSolidAngle(double pdf, double theta, int n) {
    RectSize out;
    lookupRect<double>(FootprintRule::SolidAngle, pdf, theta, n, 1, 1, out.dTheta, out.dPhi);
    return out;
}

// --- mean queries -------------------------------------------------------------------

EnvGradient::EnvGradient(int height, int width)
    : sums(static_cast<size_t>(height + 1) * (width + 1) * 3, 0.0), pixels(static_cast<size_t>(height) * width * 3, 0.0) {}

void EnvGradient::setZero() {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(pixels.begin(), pixels.end(), 0.0);
    sh.fill(0.0);
}

void EnvGradient::add(const EnvGradient& o) {
    for (size_t i = 0; i < sums.size(); ++i) sums[i] += o.sums[i];
    for (size_t i = 0; i < pixels.size(); ++i) pixels[i] += o.pixels[i];
    for (size_t i = 0; i < sh.size(); ++i) sh[i] += o.sh[i];
}

Rgbd meanQuery(const SummedAreaTable& sat, double theta, double phi, double dTheta, double dPhi, RectAlignment align) {
    const double xs = sat.width() / (2.0 * kPi), ys = sat.height() / kPi;
    return rectMean(sat, wrapPhi(phi) * xs, theta * ys, dPhi * xs, dTheta * ys, align, false).mean;
}

Rgb<Var> meanQuery(const SummedAreaTable& sat, double theta, double phi, const Var& dTheta, const Var& dPhi,
                   EnvGradient* grad, RectAlignment align) {
    const double xs = sat.width() / (2.0 * kPi), ys = sat.height() / kPi;
    ad::Tape* tape = ad::Tape::current();
    const bool tracked = tape && (grad || !dTheta.isConstant() || !dPhi.isConstant());
    MeanResult m = rectMean(sat, wrapPhi(phi) * xs, theta * ys, dPhi.value() * xs, dTheta.value() * ys, align, tracked);
    if (!tracked) return {Var(m.mean.r), Var(m.mean.g), Var(m.mean.b)};
    std::vector<double> scratch;
    scratch.reserve(6 + 2 * m.weights.size());
    for (double v : {m.dHy.r, m.dHy.g, m.dHy.b}) scratch.push_back(v * ys);
    for (double v : {m.dHx.r, m.dHx.g, m.dHx.b}) scratch.push_back(v * xs);
    for (const CornerWeight& cw : m.weights) {
        scratch.push_back(static_cast<double>(cw.index));
        scratch.push_back(cw.weight);
    }
    const uint32_t inputs[2] = {dTheta.node(), dPhi.node()};
    ad::CustomOp& op = tape->custom(3, inputs, scratch);
    op.backward = meanBackward;
    op.grad = grad;
    return {Var(m.mean.r, op.firstOutput), Var(m.mean.g, op.firstOutput + 1), Var(m.mean.b, op.firstOutput + 2)};
}

Rgb<Var> trackedRadianceAt(const EnvironmentMap& env, const Vec3d& dir, EnvGradient* grad) {
    double theta, phi;
    directionToSpherical(dir, theta, phi);
    const auto [r, c] = env.pixelOf(theta, phi);
    const Rgbd v = env.radianceAtPixel(r, c);
    if (!grad || !ad::Tape::current()) return {Var(v.r), Var(v.g), Var(v.b)};
    const size_t i = (static_cast<size_t>(r) * env.width() + c) * 3;
    return {ad::parameter(v.r, &grad->pixels[i]), ad::parameter(v.g, &grad->pixels[i + 1]),
            ad::parameter(v.b, &grad->pixels[i + 2])};
}

// --- spherical harmonics ----------------------------------------------------------------

namespace {

// Integral of the nine band-0..2 basis functions over pixel (r, c). Two-point
// Gauss-Legendre in cos(theta) is exact for the zonal parts; azimuth uses the
// pixel center, which sums exactly to zero over a full row for m != 0.
std::array<double, 9> shPixelIntegral(int h, int w, int r, int c) {
    const double dPhi = 2.0 * kPi / w;
    const double mu0 = std::cos(kPi * r / h), mu1 = std::cos(kPi * (r + 1) / h);
    const double mid = 0.5 * (mu0 + mu1), half = 0.5 * (mu0 - mu1);
    const double phi = (c + 0.5) * dPhi;
    std::array<double, 9> out{}, y;
    for (double g : {-1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)}) {
        const double mu = mid + half * g;
        const double s = std::sqrt(std::max(0.0, 1.0 - mu * mu));
        shEncode<double>(Vec3d{s * std::cos(phi), s * std::sin(phi), mu}, 2, y);
        for (int k = 0; k < 9; ++k) out[k] += y[k] * half * dPhi;
    }
    return out;
}

}  // namespace

IrradianceSH projectSh(const EnvironmentMap& env) {
    const int h = env.height(), w = env.width();
    IrradianceSH out;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const std::array<double, 9> y = shPixelIntegral(h, w, r, c);
            const Rgbd L = env.radianceAtPixel(r, c);
            for (int k = 0; k < 9; ++k) out.coeffs[k] += L * y[k];
        }
    return out;
}

Rgbd irradiance(const IrradianceSH& sh, const Vec3d& n) {
    return irradiance<double>(std::span<const Rgbd>(sh.coeffs), n);
}

std::array<Rgb<Var>, 9> trackedShCoefficients(const IrradianceSH& sh, EnvGradient* grad) {
    std::array<Rgb<Var>, 9> out;
    const bool tracked = grad && ad::Tape::current();
    for (int k = 0; k < 9; ++k) {
        const Rgbd& c = sh.coeffs[k];
        if (tracked)
            out[k] = {ad::parameter(c.r, &grad->sh[k * 3]), ad::parameter(c.g, &grad->sh[k * 3 + 1]),
                      ad::parameter(c.b, &grad->sh[k * 3 + 2])};
        else
            out[k] = {Var(c.r), Var(c.g), Var(c.b)};
    }
    return out;
}

// --- chain rule back to log radiance --------------------------------------------------------

void backpropagateEnvironment(const EnvironmentMap& env, const EnvGradient& grad, EnvironmentMap& logGrad) {
    const int h = env.height(), w = env.width();
    const size_t w1 = static_cast<size_t>(w) + 1;
    std::vector<double> adj = grad.pixels;
    if (adj.empty()) adj.assign(static_cast<size_t>(h) * w * 3, 0.0);

    // sums[r][c] depends on every pixel (r', c') with r' < r, c' < c, so a
    // pixel's adjoint is the suffix sum of the table adjoint over r > r', c > c'.
    if (!grad.sums.empty()) {
        std::vector<double> suffix(w1 * (h + 1) * 3, 0.0);
        for (int r = h; r >= 1; --r)
            for (int c = w; c >= 1; --c)
                for (int k = 0; k < 3; ++k) {
                    const size_t i = (r * w1 + c) * 3 + k;
                    double v = grad.sums[i];
                    if (r < h) v += suffix[((r + 1) * w1 + c) * 3 + k];
                    if (c < w) v += suffix[(r * w1 + c + 1) * 3 + k];
                    if (r < h && c < w) v -= suffix[((r + 1) * w1 + c + 1) * 3 + k];
                    suffix[i] = v;
                }
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                for (int k = 0; k < 3; ++k)
                    adj[(static_cast<size_t>(r) * w + c) * 3 + k] += suffix[((r + 1) * w1 + c + 1) * 3 + k];
    }

    if (std::any_of(grad.sh.begin(), grad.sh.end(), [](double v) { return v != 0.0; })) {
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const std::array<double, 9> y = shPixelIntegral(h, w, r, c);
                for (int k = 0; k < 3; ++k) {
                    double s = 0.0;
                    for (int j = 0; j < 9; ++j) s += grad.sh[j * 3 + k] * y[j];
                    adj[(static_cast<size_t>(r) * w + c) * 3 + k] += s;
                }
            }
    }

    for (size_t i = 0; i < adj.size(); ++i) logGrad.logValues[i] += adj[i] * std::exp(env.logValues[i]);
}

}  // namespace nmf
