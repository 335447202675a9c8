// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/materials.h>

#include <algorithm>
#include <random>

namespace nmf {

Diagnostics& Diagnostics::global() {
    static Diagnostics d;
    return d;
}

void Diagnostics::reset() {
    fresnelClamps = 0;
    nonFiniteTerms = 0;
    grazingClamps = 0;
}

double clampCosine(double cosOH) {
    if (cosOH < 0.0 || cosOH > 1.0) {
        // Exact 1+ulp from normalized vectors is common and harmless.
        if (cosOH < -1e-9 || cosOH > 1.0 + 1e-9) Diagnostics::global().fresnelClamps++;
        return std::clamp(cosOH, 0.0, 1.0);
    }
    return cosOH;
}

std::vector<double> shEncode(const Vec3d& v, int degree) {
    std::vector<double> out(shCount(degree));
    shEncode<double>(v, degree, out);
    return out;
}

// --- DenseLayer ----------------------------------------------------------------

DenseLayer::DenseLayer(int in, int out)
    : weights(static_cast<size_t>(in) * out, 0.0), bias(out, 0.0), in_(in), out_(out) {}

void DenseLayer::initUniform(uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    auto u = [&] { return (static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0) * scale; };
    for (double& w : weights) w = u();
    for (double& b : bias) b = u();
}

void DenseLayer::forward(std::span<const double> x, std::span<double> y) const {
    for (int o = 0; o < out_; ++o) {
        const double* row = &weights[static_cast<size_t>(o) * in_];
        double s = bias[o];
        for (int i = 0; i < in_; ++i) s += row[i] * x[i];
        y[o] = s;
    }
}

namespace {

void denseBackward(ad::Tape& tape, const ad::CustomOp& op) {
    const auto* layer = static_cast<const DenseLayer*>(op.self);
    auto* grad = static_cast<DenseLayer*>(op.grad);
    const int in = layer->inputs(), out = layer->outputs();
    const auto x = tape.scratch(op.scratch, op.numScratch);
    const auto inputs = tape.indices(op.inputs, op.numInputs);
    for (int o = 0; o < out; ++o) {
        const double d = tape.adjoint(op.firstOutput + o);
        if (d == 0.0) continue;
        const double* row = &layer->weights[static_cast<size_t>(o) * in];
        if (grad) {
            double* gRow = &grad->weights[static_cast<size_t>(o) * in];
            for (int i = 0; i < in; ++i) gRow[i] += d * x[i];
            grad->bias[o] += d;
        }
        for (int i = 0; i < in; ++i)
            if (inputs[i] != ad::kNoNode) tape.addAdjoint(inputs[i], d * row[i]);
    }
}

}  // namespace

std::vector<Var> DenseLayer::forward(std::span<const Var> x, DenseLayer* grad) const {
    std::vector<double> xv(in_), yv(out_);
    std::vector<uint32_t> nodes(in_);
    bool tracked = grad != nullptr;
    for (int i = 0; i < in_; ++i) {
        xv[i] = x[i].value();
        nodes[i] = x[i].node();
        tracked = tracked || !x[i].isConstant();
    }
    forward(xv, yv);
    std::vector<Var> y(yv.begin(), yv.end());
    ad::Tape* tape = ad::Tape::current();
    if (!tape || !tracked) return y;
    ad::CustomOp& op = tape->custom(static_cast<uint32_t>(out_), nodes, xv);
    op.backward = denseBackward;
    op.self = this;
    op.grad = grad;
    for (int o = 0; o < out_; ++o) y[o] = Var(yv[o], op.firstOutput + o);
    return y;
}

// --- MaterialDecoder -------------------------------------------------------------

MaterialDecoder::MaterialDecoder(int featureDim, double alphaMin) : layer(featureDim, 7), alphaMin_(alphaMin) {}

MaterialDecoder MaterialDecoder::random(int featureDim, uint64_t seed, double alphaMin) {
    MaterialDecoder d(featureDim, alphaMin);
    d.layer.initUniform(seed, featureDim > 0 ? 1.0 / std::sqrt(static_cast<double>(featureDim)) : 0.0);
    std::fill(d.layer.bias.begin(), d.layer.bias.end(), 0.0);
    return d;
}

namespace {

template <typename T>
MaterialSample<T> decodeHeads(std::span<const T> heads, double alphaMin) {
    MaterialSample<T> m;
    m.alpha = alphaMin + (1.0 - alphaMin) * sigmoid(heads[0]);
    m.albedo = {sigmoid(heads[1]), sigmoid(heads[2]), sigmoid(heads[3])};
    m.f0 = {sigmoid(heads[4]), sigmoid(heads[5]), sigmoid(heads[6])};
    return m;
}

}  // namespace

MaterialSample<double> MaterialDecoder::decode(std::span<const double> x) const {
    std::array<double, 7> heads;
    layer.forward(x, heads);
    MaterialSample<double> m = decodeHeads<double>(heads, alphaMin_);
    m.feature.assign(x.begin(), x.end());
    return m;
}

MaterialSample<Var> MaterialDecoder::decode(std::span<const Var> x, MaterialDecoder* grad) const {
    const std::vector<Var> heads = layer.forward(x, grad ? &grad->layer : nullptr);
    MaterialSample<Var> m = decodeHeads<Var>(heads, alphaMin_);
    m.feature.assign(x.begin(), x.end());
    return m;
}

ParamList MaterialDecoder::params() {
    return {{"decoder.weight", ParamGroup::Network, layer.weights}, {"decoder.bias", ParamGroup::Network, layer.bias}};
}

// --- GainNetwork -------------------------------------------------------------------

GainNetwork::GainNetwork(int featureDim, GainMode mode) : mode_(mode), featureDim_(featureDim) {
    layers[0] = DenseLayer(inputDim(), kHidden);
    layers[1] = DenseLayer(kHidden, kHidden);
    layers[2] = DenseLayer(kHidden, 3);
}

GainNetwork GainNetwork::random(int featureDim, GainMode mode, uint64_t seed) {
    GainNetwork g(featureDim, mode);
    for (int l = 0; l < 3; ++l)
        g.layers[l].initUniform(seed + 7919u * (l + 1), 1.0 / std::sqrt(static_cast<double>(g.layers[l].inputs())));
    return g;
}

Rgbd GainNetwork::evaluate(const HalfDiff<double>& hd, std::span<const double> x) const {
    if (mode_ == GainMode::Identity) return Rgbd(1.0);
    constexpr int kSh = shCount(kShDegree);
    std::vector<double> in(inputDim());
    shEncode<double>(hd.half, kShDegree, std::span<double>(in.data(), kSh));
    shEncode<double>(hd.diff, kShDegree, std::span<double>(in.data() + kSh, kSh));
    std::copy(x.begin(), x.end(), in.begin() + 2 * kSh);
    std::array<double, kHidden> h1, h2;
    layers[0].forward(in, h1);
    for (double& v : h1) v = softplus(v);
    layers[1].forward(h1, h2);
    for (double& v : h2) v = softplus(v);
    std::array<double, 3> o;
    layers[2].forward(h2, o);
    return {sigmoid(o[0]), sigmoid(o[1]), sigmoid(o[2])};
}

Rgb<Var> GainNetwork::evaluate(const HalfDiff<Var>& hd, std::span<const Var> x, GainNetwork* grad) const {
    if (mode_ == GainMode::Identity) return Rgb<Var>(Var(1.0));
    constexpr int kSh = shCount(kShDegree);
    std::vector<Var> in(inputDim());
    shEncode<Var>(hd.half, kShDegree, std::span<Var>(in.data(), kSh));
    shEncode<Var>(hd.diff, kShDegree, std::span<Var>(in.data() + kSh, kSh));
    std::copy(x.begin(), x.end(), in.begin() + 2 * kSh);
    std::vector<Var> h1 = layers[0].forward(in, grad ? &grad->layers[0] : nullptr);
    for (Var& v : h1) v = softplus(v);
    std::vector<Var> h2 = layers[1].forward(h1, grad ? &grad->layers[1] : nullptr);
    for (Var& v : h2) v = softplus(v);
    const std::vector<Var> o = layers[2].forward(h2, grad ? &grad->layers[2] : nullptr);
    return {sigmoid(o[0]), sigmoid(o[1]), sigmoid(o[2])};
}

ParamList GainNetwork::params() {
    ParamList list;
    for (int l = 0; l < 3; ++l) {
        list.push_back({"gain.layer" + std::to_string(l) + ".weight", ParamGroup::Network, layers[l].weights});
        list.push_back({"gain.layer" + std::to_string(l) + ".bias", ParamGroup::Network, layers[l].bias});
    }
    return list;
}

// --- reference BRDF ----------------------------------------------------------------

Rgbd specularBrdf(const Vec3d& wo, const Vec3d& wi, const Vec3d& n, const MaterialSample<double>& m,
                  const GainNetwork& net) {
    const double cosNV = dot(n, wo), cosNL = dot(n, wi);
    if (cosNV <= 0.0 || cosNL <= 0.0) return Rgbd(0.0);
    const Vec3d h = normalize(wo + wi);
    double denom = 4.0 * cosNV * cosNL;
    if (denom < 1e-7) {
        denom = 1e-7;
        Diagnostics::global().grazingClamps++;
    }
    const double dg = trDistribution(dot(n, h), m.alpha) * (dot(wo, h) > 0 ? smithG1(cosNV, m.alpha) : 0.0);
    const Rgbd g = gain<double>(m.feature, wo, wi, n, net);
    return g * (dg / denom);
}

Rgbd fullBrdf(const Vec3d& wo, const Vec3d& wi, const Vec3d& n, const MaterialSample<double>& m,
              const GainNetwork& net) {
    if (dot(n, wo) <= 0.0 || dot(n, wi) <= 0.0) return Rgbd(0.0);
    const Vec3d h = normalize(wo + wi);
    const Rgbd fr = fresnelSchlick(m.f0, dot(h, wo));
    return m.albedo * kInvPi * (Rgbd(1.0) - fr) + fr * specularBrdf(wo, wi, n, m, net);
}

}  // namespace nmf
