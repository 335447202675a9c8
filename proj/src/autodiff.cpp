// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/autodiff.h>

#include <algorithm>

namespace nmf::ad {

Tape*& Tape::current() {
    thread_local Tape* tape = nullptr;
    return tape;
}

void Tape::clear() {
    edgeBegin_.assign(1, 0);
    edges_.clear();
    customs_.clear();
    sinks_.clear();
    indexArena_.clear();
    scratchArena_.clear();
}

uint32_t Tape::leaf() {
    edgeBegin_.push_back(static_cast<uint32_t>(edges_.size()));
    return static_cast<uint32_t>(edgeBegin_.size() - 2);
}

uint32_t Tape::unary(uint32_t a, double da) {
    if (a != kNoNode) edges_.push_back({a, da});
    return leaf();
}

uint32_t Tape::binary(uint32_t a, double da, uint32_t b, double db) {
    if (a != kNoNode) edges_.push_back({a, da});
    if (b != kNoNode) edges_.push_back({b, db});
    return leaf();
}

uint32_t Tape::nary(std::span<const uint32_t> parents, std::span<const double> partials) {
    for (size_t k = 0; k < parents.size(); ++k)
        if (parents[k] != kNoNode) edges_.push_back({parents[k], partials[k]});
    return leaf();
}

void Tape::bindSink(uint32_t node, double* sink) {
    if (node != kNoNode) sinks_.emplace_back(node, sink);
}

CustomOp& Tape::custom(uint32_t numOutputs, std::span<const uint32_t> inputs, std::span<const double> scratch) {
    CustomOp op;
    op.inputs = static_cast<uint32_t>(indexArena_.size());
    op.numInputs = static_cast<uint32_t>(inputs.size());
    indexArena_.insert(indexArena_.end(), inputs.begin(), inputs.end());
    op.scratch = static_cast<uint32_t>(scratchArena_.size());
    op.numScratch = static_cast<uint32_t>(scratch.size());
    scratchArena_.insert(scratchArena_.end(), scratch.begin(), scratch.end());
    op.firstOutput = static_cast<uint32_t>(size());
    op.numOutputs = numOutputs;
    for (uint32_t k = 0; k < numOutputs; ++k) leaf();
    customs_.emplace_back(op.firstOutput + numOutputs - 1, op);
    return customs_.back().second;
}

void Tape::backward(uint32_t root, double seed) {
    const size_t n = size();
    adjoint_.assign(n, 0.0);
    if (root == kNoNode) return;
    adjoint_[root] = seed;
    auto custom = customs_.rbegin();
    while (custom != customs_.rend() && custom->first > root) ++custom;
    for (int64_t i = root; i >= 0; --i) {
        const auto node = static_cast<uint32_t>(i);
        if (custom != customs_.rend() && custom->first == node) {
            custom->second.backward(*this, custom->second);
            ++custom;
        }
        const double a = adjoint_[node];
        if (a == 0.0) continue;
        for (uint32_t e = edgeBegin_[node]; e < edgeBegin_[node + 1]; ++e)
            adjoint_[edges_[e].parent] += a * edges_[e].partial;
    }
    for (auto& [node, sink] : sinks_) *sink += adjoint_[node];
}

Var variable(double v) {
    Tape* t = Tape::current();
    return t ? Var(v, t->leaf()) : Var(v);
}

Var parameter(double v, double* sink) {
    Tape* t = Tape::current();
    if (!t) return Var(v);
    Var x(v, t->leaf());
    t->bindSink(x.node(), sink);
    return x;
}

namespace {

inline Var makeUnary(double v, const Var& a, double da) {
    if (a.isConstant()) return Var(v);
    return Var(v, Tape::current()->unary(a.node(), da));
}

inline Var makeBinary(double v, const Var& a, double da, const Var& b, double db) {
    if (a.isConstant() && b.isConstant()) return Var(v);
    return Var(v, Tape::current()->binary(a.node(), da, b.node(), db));
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
    if (b.isConstant()) return makeUnary(a.value() + b.value(), a, 1.0);
    if (a.isConstant()) return makeUnary(a.value() + b.value(), b, 1.0);
    return makeBinary(a.value() + b.value(), a, 1.0, b, 1.0);
}
Var operator-(const Var& a, const Var& b) {
    if (b.isConstant()) return makeUnary(a.value() - b.value(), a, 1.0);
    if (a.isConstant()) return makeUnary(a.value() - b.value(), b, -1.0);
    return makeBinary(a.value() - b.value(), a, 1.0, b, -1.0);
}
Var operator*(const Var& a, const Var& b) {
    if (b.isConstant()) return makeUnary(a.value() * b.value(), a, b.value());
    if (a.isConstant()) return makeUnary(a.value() * b.value(), b, a.value());
    return makeBinary(a.value() * b.value(), a, b.value(), b, a.value());
}
Var operator/(const Var& a, const Var& b) {
    const double inv = 1.0 / b.value();
    const double q = a.value() * inv;
    if (b.isConstant()) return makeUnary(q, a, inv);
    if (a.isConstant()) return makeUnary(q, b, -q * inv);
    return makeBinary(q, a, inv, b, -q * inv);
}
Var operator-(const Var& a) { return makeUnary(-a.value(), a, -1.0); }

Var& Var::operator+=(const Var& o) { return *this = *this + o; }
Var& Var::operator-=(const Var& o) { return *this = *this - o; }
Var& Var::operator*=(const Var& o) { return *this = *this * o; }

Var exp(const Var& a) {
    const double e = std::exp(a.value());
    return makeUnary(e, a, e);
}
Var log(const Var& a) { return makeUnary(std::log(a.value()), a, 1.0 / a.value()); }
Var sqrt(const Var& a) {
    const double s = std::sqrt(a.value());
    return makeUnary(s, a, s > 0 ? 0.5 / s : 0.0);
}
Var pow(const Var& a, double e) {
    const double p = std::pow(a.value(), e);
    return makeUnary(p, a, a.value() == 0.0 ? (e == 1.0 ? 1.0 : 0.0) : e * p / a.value());
}
Var abs(const Var& a) { return makeUnary(std::abs(a.value()), a, a.value() < 0 ? -1.0 : 1.0); }
Var acos(const Var& a) {
    const double x = std::clamp(a.value(), -1.0, 1.0);
    const double d = 1.0 - x * x;
    return makeUnary(std::acos(x), a, d > 0 ? -1.0 / std::sqrt(d) : 0.0);
}
Var max(const Var& a, double b) { return a.value() >= b ? a : Var(b); }
Var min(const Var& a, double b) { return a.value() <= b ? a : Var(b); }

}  // namespace nmf::ad

namespace nmf {

ad::Var sigmoid(const ad::Var& x) {
    const double s = sigmoid(x.value());
    if (x.isConstant()) return ad::Var(s);
    return ad::Var(s, ad::Tape::current()->unary(x.node(), s * (1.0 - s)));
}

ad::Var softplus(const ad::Var& x) {
    const double v = softplus(x.value());
    if (x.isConstant()) return ad::Var(v);
    return ad::Var(v, ad::Tape::current()->unary(x.node(), sigmoid(x.value())));
}

}  // namespace nmf
