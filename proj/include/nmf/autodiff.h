// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

// Reverse-mode automatic differentiation over a flat tape.
//
// Every tracked scalar (`Var`) is a node on the tape of the current thread.
// Nodes record their parents together with the local partial derivatives;
// a reverse sweep accumulates adjoints from the root back to the leaves.
// Expensive kernels (grid lookups, dense layers, environment rectangle
// means) are recorded as custom operations: they create their output nodes
// without edges and register a backward callback that scatters the output
// adjoints into their inputs and into parameter gradient buffers.
//
// Constants are Vars with no node; arithmetic between constants never
// touches the tape, so generic code instantiated with `Var` only pays for
// the values that actually depend on parameters.

#pragma once

#include <nmf/vec.h>

#include <cstdint>
#include <span>
#include <vector>

namespace nmf::ad {

inline constexpr uint32_t kNoNode = 0xffffffffu;

class Tape;

/// Backward callback of a custom operation. Scratch and index storage lives
/// on the tape so recording a custom op never allocates per call.
struct CustomOp {
    void (*backward)(Tape& tape, const CustomOp& op) = nullptr;
    const void* self = nullptr;
    void* grad = nullptr;
    uint32_t inputs = 0, numInputs = 0;     // offsets into the tape index arena
    uint32_t firstOutput = 0, numOutputs = 0;
    uint32_t scratch = 0, numScratch = 0;   // offsets into the tape scratch arena
    Vec3d point{};
    double aux = 0.0;
};

class Tape {
  public:
    /// Tape used by Var arithmetic on this thread (nullptr when none).
    static Tape*& current();

    void clear();
    size_t size() const { return edgeBegin_.size() - 1; }

    uint32_t leaf();
    uint32_t unary(uint32_t a, double da);
    uint32_t binary(uint32_t a, double da, uint32_t b, double db);
    /// Node with an arbitrary number of parents; constant parents are skipped.
    uint32_t nary(std::span<const uint32_t> parents, std::span<const double> partials);

    /// Attaches a gradient sink to a node: after backward, its adjoint is added to *sink.
    void bindSink(uint32_t node, double* sink);

    /// Records a custom op with `numOutputs` fresh output nodes; returns the op for filling.
    CustomOp& custom(uint32_t numOutputs, std::span<const uint32_t> inputs, std::span<const double> scratch);

    std::span<const uint32_t> indices(uint32_t offset, uint32_t n) const { return {indexArena_.data() + offset, n}; }
    std::span<const double> scratch(uint32_t offset, uint32_t n) const { return {scratchArena_.data() + offset, n}; }

    double adjoint(uint32_t node) const { return node == kNoNode ? 0.0 : adjoint_[node]; }
    void addAdjoint(uint32_t node, double v) {
        if (node != kNoNode) adjoint_[node] += v;
    }

    /// Reverse sweep seeded with d(root)/d(root) = seed. Adjoints of all nodes
    /// remain readable until the next clear(). Sinks are flushed at the end.
    void backward(uint32_t root, double seed = 1.0);

  private:
    struct Edge {
        uint32_t parent;
        double partial;
    };
    std::vector<uint32_t> edgeBegin_{0};
    std::vector<Edge> edges_;
    std::vector<double> adjoint_;
    std::vector<std::pair<uint32_t, CustomOp>> customs_;  // keyed by last output node
    std::vector<std::pair<uint32_t, double*>> sinks_;
    std::vector<uint32_t> indexArena_;
    std::vector<double> scratchArena_;
};

/// Installs a tape as the current one for the lifetime of the scope.
class TapeScope {
  public:
    explicit TapeScope(Tape& t) : prev_(Tape::current()) { Tape::current() = &t; }
    ~TapeScope() { Tape::current() = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape* prev_;
};

/// Tracked scalar. Implicitly constructible from double (as a constant).
class Var {
  public:
    Var() = default;
    Var(double v) : v_(v) {}  // NOLINT(google-explicit-constructor)
    Var(double v, uint32_t node) : v_(v), node_(node) {}

    double value() const { return v_; }
    uint32_t node() const { return node_; }
    bool isConstant() const { return node_ == kNoNode; }

    Var& operator+=(const Var& o);
    Var& operator-=(const Var& o);
    Var& operator*=(const Var& o);

  private:
    double v_ = 0.0;
    uint32_t node_ = kNoNode;
};

/// Creates an independent variable on the current tape.
Var variable(double v);
/// Creates an independent variable whose gradient is added to *sink after backward().
Var parameter(double v, double* sink);

inline double value(const Var& v) { return v.value(); }

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
inline Var operator+(const Var& a, double b) { return a + Var(b); }
inline Var operator+(double a, const Var& b) { return Var(a) + b; }
inline Var operator-(const Var& a, double b) { return a - Var(b); }
inline Var operator-(double a, const Var& b) { return Var(a) - b; }
inline Var operator*(const Var& a, double b) { return a * Var(b); }
inline Var operator*(double a, const Var& b) { return Var(a) * b; }
inline Var operator/(const Var& a, double b) { return a / Var(b); }
inline Var operator/(double a, const Var& b) { return Var(a) / b; }

inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }
inline bool operator<=(const Var& a, const Var& b) { return a.value() <= b.value(); }
inline bool operator>=(const Var& a, const Var& b) { return a.value() >= b.value(); }

Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var pow(const Var& a, double e);
Var abs(const Var& a);
Var acos(const Var& a);
/// Elementwise max with a constant; the derivative is zero where the bound is active.
Var max(const Var& a, double b);
Var min(const Var& a, double b);

}  // namespace nmf::ad

namespace nmf {

using ad::Var;

// Activations shared by both scalar paths.
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double softplus(double x) { return x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
ad::Var sigmoid(const ad::Var& x);
ad::Var softplus(const ad::Var& x);

inline double clampMin(double x, double lo) { return std::max(x, lo); }
inline ad::Var clampMin(const ad::Var& x, double lo) { return ad::max(x, lo); }
inline double clampMax(double x, double hi) { return std::min(x, hi); }
inline ad::Var clampMax(const ad::Var& x, double hi) { return ad::min(x, hi); }

template <typename T>
inline constexpr bool kTracked = std::is_same_v<T, ad::Var>;

}  // namespace nmf
