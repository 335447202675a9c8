// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/model.h>

#include <algorithm>
#include <cmath>

namespace nmf {

void roundToFloat(ParamList params) {
    for (ParamRef& p : params)
        for (double& v : p.data) v = static_cast<double>(static_cast<float>(v));
}

namespace {

void addInto(ParamList dst, ParamList src) {
    for (size_t i = 0; i < dst.size(); ++i)
        for (size_t k = 0; k < dst[i].data.size(); ++k) dst[i].data[k] += src[i].data[k];
}

}  // namespace

Model Model::create(const ModelShape& shape, uint64_t seed) {
    Model m;
    GridShape gs = shape.grid;
    // Bounds are stored as floats in checkpoints; keep them exactly representable.
    for (int a = 0; a < 3; ++a) {
        gs.bounds.lo[a] = static_cast<float>(gs.bounds.lo[a]);
        gs.bounds.hi[a] = static_cast<float>(gs.bounds.hi[a]);
    }
    m.grid = FactorGrid::random(gs, seed);
    m.decoder = MaterialDecoder::random(shape.grid.featureDim, seed + 1);
    m.gain = GainNetwork::random(shape.grid.featureDim, shape.gainMode, seed + 2);
    m.env = EnvironmentMap(shape.envHeight, shape.envWidth, shape.envInit);
    roundToFloat(m.params());
    return m;
}

ParamList Model::params() {
    ParamList out = grid.params();
    ParamList d = decoder.params();
    out.insert(out.end(), d.begin(), d.end());
    ParamList g = gain.params();
    out.insert(out.end(), g.begin(), g.end());
    ParamList e = env.params();
    out.insert(out.end(), e.begin(), e.end());
    return out;
}

bool Model::allFinite() const {
    Model& self = const_cast<Model&>(*this);
    for (const ParamRef& p : self.params())
        if (!std::all_of(p.data.begin(), p.data.end(), [](double v) { return std::isfinite(v); })) return false;
    return true;
}

ModelGradient ModelGradient::zerosLike(const Model& m) {
    ModelGradient g;
    g.grid = m.grid.zerosLike();
    g.decoder = m.decoder.zerosLike();
    g.gain = m.gain.zerosLike();
    g.envSinks = EnvGradient(m.env.height(), m.env.width());
    g.env = m.env.zerosLike();
    return g;
}

void ModelGradient::setZero() {
    for (ParamRef& p : params()) std::fill(p.data.begin(), p.data.end(), 0.0);
    envSinks.setZero();
}

void ModelGradient::add(const ModelGradient& o) {
    addInto(params(), const_cast<ModelGradient&>(o).params());
    envSinks.add(o.envSinks);
}

void ModelGradient::finish(const Model& m) {
    backpropagateEnvironment(m.env, envSinks, env);
    envSinks.setZero();
}

ParamList ModelGradient::params() {
    ParamList out = grid.params();
    ParamList d = decoder.params();
    out.insert(out.end(), d.begin(), d.end());
    ParamList g = gain.params();
    out.insert(out.end(), g.begin(), g.end());
    ParamList e = env.params();
    out.insert(out.end(), e.begin(), e.end());
    return out;
}

}  // namespace nmf
