#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace rubble {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

struct Aabb {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void grow(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void grow(const Aabb& b) {
        lo = lo.cwiseMin(b.lo);
        hi = hi.cwiseMax(b.hi);
    }
    [[nodiscard]] bool empty() const { return (lo.array() > hi.array()).any(); }
    [[nodiscard]] Vec3 center() const { return 0.5 * (lo + hi); }
    [[nodiscard]] Vec3 extent() const { return hi - lo; }
    [[nodiscard]] bool overlaps(const Aabb& b) const {
        return (lo.array() <= b.hi.array()).all() && (b.lo.array() <= hi.array()).all();
    }
    [[nodiscard]] bool contains(const Vec3& p) const {
        return (lo.array() <= p.array()).all() && (p.array() <= hi.array()).all();
    }
    [[nodiscard]] Aabb inflated(double r) const {
        return {lo.array() - r, hi.array() + r};
    }
};

/// Orthonormal tangent pair for a unit normal; deterministic in `n`.
inline void tangent_basis(const Vec3& n, Vec3& t1, Vec3& t2) {
    if (std::abs(n.x()) >= 0.57735) {
        t1 = Vec3(n.y(), -n.x(), 0.0).normalized();
    } else {
        t1 = Vec3(0.0, n.z(), -n.y()).normalized();
    }
    t2 = n.cross(t1);
}

/// Rotation by `angle` radians about a unit axis.
inline Quat axis_angle(const Vec3& axis, double angle) {
    return Quat(Eigen::AngleAxisd(angle, axis));
}

/// Quaternion distance that treats q and -q as the same rotation.
inline double quat_distance(const Quat& a, const Quat& b) {
    return std::min((a.coeffs() - b.coeffs()).norm(), (a.coeffs() + b.coeffs()).norm());
}

inline double smoothstep(double e0, double e1, double x) {
    const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

}  // namespace rubble
