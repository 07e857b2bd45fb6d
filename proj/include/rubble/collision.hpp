#pragma once

#include <array>
#include <cstdint>

#include "rubble/math.hpp"
#include "rubble/polyhedron.hpp"

namespace rubble {

struct Pose {
    Vec3 position = Vec3::Zero();
    Mat3 rotation = Mat3::Identity();

    [[nodiscard]] Vec3 apply(const Vec3& local) const { return rotation * local + position; }
};

struct ContactPoint {
    Vec3 position;      // world, midway between the surfaces
    double separation;  // negative when penetrating
};

/// Up to four contact points sharing one normal, which points from A to B.
struct Manifold {
    Vec3 normal = Vec3::UnitZ();
    std::array<ContactPoint, 4> points{};
    int count = 0;
};

/// Feature that separated a pair last time; tested first on the next call.
struct SeparatingAxis {
    enum Kind : std::uint8_t { None, FaceA, FaceB, Edges };
    Kind kind = None;
    int i = -1, j = -1;
};

/// Contacts between two convex polyhedra, reported while the separation is
/// at most `margin`. Returns false when no contact is generated. `hint`, if
/// given, is read and updated with the separating feature.
bool collide(const ConvexPolyhedron& a, const Pose& pa, const ConvexPolyhedron& b, const Pose& pb,
             double margin, Manifold& out, SeparatingAxis* hint = nullptr);

/// Contacts between the ground plane z = 0 (as A) and a body (as B).
bool collide_ground(const ConvexPolyhedron& b, const Pose& pb, double margin, Manifold& out);

/// Signed distance along the best separating axis: positive when disjoint,
/// minus the penetration depth when overlapping.
double separation(const ConvexPolyhedron& a, const Pose& pa, const ConvexPolyhedron& b, const Pose& pb);

}  // namespace rubble
