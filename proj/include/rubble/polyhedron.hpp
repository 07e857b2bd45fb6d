#pragma once

#include <array>
#include <span>
#include <vector>

#include "rubble/math.hpp"

namespace rubble {

struct HullFace {
    Vec3 normal;              // outward, unit
    double offset = 0.0;      // normal . x == offset on the face plane
    std::vector<int> verts;   // counter-clockwise seen from outside
};

struct HullEdge {
    int v0 = 0, v1 = 0;
    int f0 = 0, f1 = 0;       // adjacent faces
};

struct MassProperties {
    double volume = 0.0;
    Vec3 centroid = Vec3::Zero();
    Mat3 inertia = Mat3::Zero();  // unit density, about the centroid
};

/// Closed convex polyhedron with polygonal faces and unique edges.
class ConvexPolyhedron {
public:
    ConvexPolyhedron() = default;

    /// Convex hull of a point cloud; coplanar triangles are merged into
    /// polygons. Throws AssetError when the points span no volume.
    static ConvexPolyhedron hull(std::span<const Vec3> points);
    static ConvexPolyhedron box(const Vec3& half_extent);
    /// Regular prism inscribed in a z-aligned cylinder.
    static ConvexPolyhedron prism(double radius, double height, int segments);

    [[nodiscard]] const std::vector<Vec3>& vertices() const { return vertices_; }
    [[nodiscard]] const std::vector<HullFace>& faces() const { return faces_; }
    [[nodiscard]] const std::vector<HullEdge>& edges() const { return edges_; }

    [[nodiscard]] bool contains(const Vec3& p, double eps = 0.0) const;
    [[nodiscard]] Vec3 support(const Vec3& dir) const;
    [[nodiscard]] double bounding_radius() const { return radius_; }
    [[nodiscard]] MassProperties mass_properties() const;

    /// Fan triangulation of every face, outward winding.
    [[nodiscard]] std::vector<std::array<int, 3>> triangles() const;

    /// Applies x -> rotation * (x - origin) to the vertex set.
    [[nodiscard]] ConvexPolyhedron transformed(const Mat3& rotation, const Vec3& origin) const;

private:
    void finalize();

    std::vector<Vec3> vertices_;
    std::vector<HullFace> faces_;
    std::vector<HullEdge> edges_;
    double radius_ = 0.0;
};

}  // namespace rubble
