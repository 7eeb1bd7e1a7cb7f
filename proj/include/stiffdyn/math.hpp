#pragma once

// Vector and quaternion primitives shared by the simulator, data generation,
// and evaluation. Quaternions are stored scalar-first (w, x, y, z); rotation
// quaternions are kept unit-norm by the callers that integrate them.

#include <array>
#include <cmath>

namespace stiffdyn {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline bool is_finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

struct Quat {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Quat() = default;
    constexpr Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

    constexpr Quat conjugate() const { return {w, -x, -y, -z}; }
    constexpr Vec3 vec() const { return {x, y, z}; }
};

inline double norm(const Quat& q) {
    return std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
}

inline double dot(const Quat& a, const Quat& b) {
    return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Quat normalized(const Quat& q) {
    const double n = norm(q);
    return {q.w / n, q.x / n, q.y / n, q.z / n};
}

inline bool is_finite(const Quat& q) {
    return std::isfinite(q.w) && std::isfinite(q.x) && std::isfinite(q.y) && std::isfinite(q.z);
}

// Hamilton product a ⊗ b.
constexpr Quat quat_mul(const Quat& a, const Quat& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

// Rotation of angle |v| about axis v/|v|: [cos(|v|/2); v̂ sin(|v|/2)].
// Below 1e-12 the sinc factor is taken at its limit, giving (1, v/2).
inline Quat quat_exp(const Vec3& v) {
    const double angle = norm(v);
    if (angle < 1e-12) {
        return {1.0, 0.5 * v.x, 0.5 * v.y, 0.5 * v.z};
    }
    const double half = 0.5 * angle;
    const double s = std::sin(half) / angle;
    return {std::cos(half), s * v.x, s * v.y, s * v.z};
}

// Inverse of quat_exp for unit q; sign-canonicalized so w >= 0, which pins the
// returned rotation angle to [0, π].
inline Vec3 quat_log(const Quat& q_in) {
    Quat q = q_in;
    if (q.w < 0.0) {
        q = {-q.w, -q.x, -q.y, -q.z};
    }
    const double s = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
    // 2*atan2(s, w)/s -> 2/w as s -> 0
    const double factor = (s > 1e-12) ? 2.0 * std::atan2(s, q.w) / s : 2.0 / q.w;
    return {factor * q.x, factor * q.y, factor * q.z};
}

// Body-to-world transform q v q⁻¹ for unit q.
inline Vec3 rotate(const Quat& q, const Vec3& v) {
    const Vec3 u = q.vec();
    const Vec3 t = 2.0 * cross(u, v);
    return v + q.w * t + cross(u, t);
}

// Relative angle between two unit quaternions in degrees, double-cover aware.
inline double quat_angle_deg(const Quat& a, const Quat& b) {
    const double d = std::min(1.0, std::abs(dot(a, b)));
    return 2.0 * std::acos(d) * 180.0 / M_PI;
}

}  // namespace stiffdyn
