#pragma once

#include <cmath>

namespace vn {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        double n = norm();
        return n > 0.0 ? *this / n : Vec3{0, 0, 0};
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

struct Vec2 {
    double x = 0.0, y = 0.0;
    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}
    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    double norm() const { return std::sqrt(x * x + y * y); }
};

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

/// Wrap an angle in degrees to [0, 360).
inline double wrap_deg(double a) {
    a = std::fmod(a, 360.0);
    if (a < 0.0) a += 360.0;
    return a;
}

/// Smallest absolute difference between two angles in degrees, in [0, 180].
inline double angle_diff_deg(double a, double b) {
    double d = std::fabs(wrap_deg(a) - wrap_deg(b));
    return d > 180.0 ? 360.0 - d : d;
}

/// Angle between two vectors in degrees, in [0, 180].
inline double angle_between_deg(const Vec3& a, const Vec3& b) {
    double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    double c = a.dot(b) / (na * nb);
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return rad_to_deg(std::acos(c));
}

/// Deterministic orthonormal frame (n1, n2) perpendicular to t.
/// Used both by the anatomy generator (to aim child branches) and by the
/// simulator (to express a junction's roll orientation).
inline void perp_frame(const Vec3& t, Vec3& n1, Vec3& n2) {
    Vec3 u = t.normalized();
    // Pick the axis least aligned with t as the helper.
    Vec3 h = std::fabs(u.x) <= std::fabs(u.y)
                 ? (std::fabs(u.x) <= std::fabs(u.z) ? Vec3{1, 0, 0} : Vec3{0, 0, 1})
                 : (std::fabs(u.y) <= std::fabs(u.z) ? Vec3{0, 1, 0} : Vec3{0, 0, 1});
    n1 = (h - u * h.dot(u)).normalized();
    n2 = u.cross(n1);
}

/// Rotation of v by Euler angles (degrees) applied as Rz * Ry * Rx.
inline Vec3 rotate_euler(const Vec3& v, double rx_deg, double ry_deg, double rz_deg) {
    double ax = deg_to_rad(rx_deg), ay = deg_to_rad(ry_deg), az = deg_to_rad(rz_deg);
    double cx = std::cos(ax), sx = std::sin(ax);
    double cy = std::cos(ay), sy = std::sin(ay);
    double cz = std::cos(az), sz = std::sin(az);
    // Rx
    Vec3 a{v.x, cx * v.y - sx * v.z, sx * v.y + cx * v.z};
    // Ry
    Vec3 b{cy * a.x + sy * a.z, a.y, -sy * a.x + cy * a.z};
    // Rz
    return {cz * b.x - sz * b.y, sz * b.x + cz * b.y, b.z};
}

} // namespace vn
