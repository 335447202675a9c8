// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace nmf {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInvPi = 1.0 / std::numbers::pi;

/// Base exception for every recoverable failure in the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Scalar helpers shared by the double and autodiff paths. `value()` strips the
// derivative part of a tracked scalar; for plain doubles it is the identity.
inline double value(double x) { return x; }

template <typename T>
struct Vec3 {
    T x{}, y{}, z{};

    Vec3() = default;
    Vec3(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}
    template <typename U>
        requires(!std::is_same_v<U, T>)
    explicit Vec3(const Vec3<U>& o) : x(T(o.x)), y(T(o.y)), z(T(o.z)) {}

    T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    const T& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3& operator+=(const Vec3& o) {
        x = x + o.x;
        y = y + o.y;
        z = z + o.z;
        return *this;
    }
};

using Vec3d = Vec3<double>;

template <typename T> Vec3<T> operator+(const Vec3<T>& a, const Vec3<T>& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
template <typename T> Vec3<T> operator-(const Vec3<T>& a, const Vec3<T>& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
template <typename T> Vec3<T> operator-(const Vec3<T>& a) { return {-a.x, -a.y, -a.z}; }
template <typename T, typename S> requires std::is_convertible_v<S, T> Vec3<T> operator*(const Vec3<T>& a, const S& s) { return {a.x * s, a.y * s, a.z * s}; }
template <typename T, typename S> requires std::is_convertible_v<S, T> Vec3<T> operator*(const S& s, const Vec3<T>& a) { return {a.x * s, a.y * s, a.z * s}; }
template <typename T, typename S> requires std::is_convertible_v<S, T> Vec3<T> operator/(const Vec3<T>& a, const S& s) { return {a.x / s, a.y / s, a.z / s}; }

template <typename T> T dot(const Vec3<T>& a, const Vec3<T>& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
template <typename T> Vec3<T> cross(const Vec3<T>& a, const Vec3<T>& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
template <typename T> T lengthSquared(const Vec3<T>& a) { return dot(a, a); }
template <typename T> T length(const Vec3<T>& a) {
    using std::sqrt;
    return sqrt(dot(a, a));
}
template <typename T> Vec3<T> normalize(const Vec3<T>& a) { return a / length(a); }
template <typename T> Vec3d value(const Vec3<T>& a) { return {value(a.x), value(a.y), value(a.z)}; }

/// Linear RGB triple; same arithmetic as Vec3 with channel naming.
template <typename T>
struct Rgb {
    T r{}, g{}, b{};

    Rgb() = default;
    Rgb(T r_, T g_, T b_) : r(r_), g(g_), b(b_) {}
    explicit Rgb(T v) : r(v), g(v), b(v) {}
    template <typename U>
        requires(!std::is_same_v<U, T>)
    explicit Rgb(const Rgb<U>& o) : r(T(o.r)), g(T(o.g)), b(T(o.b)) {}

    T& operator[](int i) { return i == 0 ? r : (i == 1 ? g : b); }
    const T& operator[](int i) const { return i == 0 ? r : (i == 1 ? g : b); }

    Rgb& operator+=(const Rgb& o) {
        r = r + o.r;
        g = g + o.g;
        b = b + o.b;
        return *this;
    }
};

using Rgbd = Rgb<double>;

template <typename T> Rgb<T> operator+(const Rgb<T>& a, const Rgb<T>& b) { return {a.r + b.r, a.g + b.g, a.b + b.b}; }
template <typename T> Rgb<T> operator-(const Rgb<T>& a, const Rgb<T>& b) { return {a.r - b.r, a.g - b.g, a.b - b.b}; }
template <typename T> Rgb<T> operator*(const Rgb<T>& a, const Rgb<T>& b) { return {a.r * b.r, a.g * b.g, a.b * b.b}; }
template <typename T, typename S> requires std::is_convertible_v<S, T> Rgb<T> operator*(const Rgb<T>& a, const S& s) { return {a.r * s, a.g * s, a.b * s}; }
template <typename T, typename S> requires std::is_convertible_v<S, T> Rgb<T> operator*(const S& s, const Rgb<T>& a) { return {a.r * s, a.g * s, a.b * s}; }
template <typename T, typename S> requires std::is_convertible_v<S, T> Rgb<T> operator/(const Rgb<T>& a, const S& s) { return {a.r / s, a.g / s, a.b / s}; }
template <typename T> Rgbd value(const Rgb<T>& a) { return {value(a.r), value(a.g), value(a.b)}; }

inline bool isFinite(const Rgbd& c) { return std::isfinite(c.r) && std::isfinite(c.g) && std::isfinite(c.b); }
inline bool isFinite(const Vec3d& v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }
inline double maxComponent(const Rgbd& c) { return std::max(c.r, std::max(c.g, c.b)); }

/// Row-major 4x4 matrix, used for camera poses.
struct Mat4 {
    std::array<double, 16> m{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};

    double operator()(int r, int c) const { return m[r * 4 + c]; }
    double& operator()(int r, int c) { return m[r * 4 + c]; }

    Vec3d transformPoint(const Vec3d& p) const {
        return {m[0] * p.x + m[1] * p.y + m[2] * p.z + m[3], m[4] * p.x + m[5] * p.y + m[6] * p.z + m[7],
                m[8] * p.x + m[9] * p.y + m[10] * p.z + m[11]};
    }
    Vec3d transformVector(const Vec3d& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[4] * v.x + m[5] * v.y + m[6] * v.z,
                m[8] * v.x + m[9] * v.y + m[10] * v.z};
    }
    Vec3d translation() const { return {m[3], m[7], m[11]}; }
};

struct Aabb {
    Vec3d lo{-1.5, -1.5, -1.5};
    Vec3d hi{1.5, 1.5, 1.5};

    bool contains(const Vec3d& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
    }
    Vec3d extent() const { return hi - lo; }

    // Slab test; returns false when the ray misses. Interval is clipped to t >= 0.
    bool intersect(const Vec3d& o, const Vec3d& d, double& t0, double& t1) const {
        t0 = 0.0;
        t1 = 1e30;
        for (int a = 0; a < 3; ++a) {
            double inv = 1.0 / d[a];
            double tn = (lo[a] - o[a]) * inv;
            double tf = (hi[a] - o[a]) * inv;
            if (tn > tf) std::swap(tn, tf);
            if (std::isnan(tn)) tn = -1e30;
            if (std::isnan(tf)) tf = 1e30;
            t0 = std::max(t0, tn);
            t1 = std::min(t1, tf);
            if (t0 > t1) return false;
        }
        return true;
    }
};

// Direction <-> equirectangular angles. Polar angle is measured from +z.
inline Vec3d sphericalDirection(double theta, double phi) {
    double s = std::sin(theta);
    return {s * std::cos(phi), s * std::sin(phi), std::cos(theta)};
}

inline void directionToSpherical(const Vec3d& d, double& theta, double& phi) {
    theta = std::acos(std::clamp(d.z, -1.0, 1.0));
    phi = std::atan2(d.y, d.x);
    if (phi < 0) phi += 2 * kPi;
}

}  // namespace nmf
