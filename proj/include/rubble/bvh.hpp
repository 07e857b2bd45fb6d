#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rubble/math.hpp"

namespace rubble {

struct Triangle {
    Vec3 v0, v1, v2;
    Vec3 normal;  // unit, outward
    int instance = -1;
};

struct SurfaceInfo {
    std::size_t class_index = 0;
    Vec3 albedo = Vec3::Constant(0.5);
    double texture_amplitude = 0.0;  // relative albedo variation of the procedural texture
    double texture_scale = 8.0;      // noise frequency, 1/m
    double specular = 0.2;           // Blinn highlight strength
};

struct RayHit {
    double distance = 0.0;
    Vec3 point;
    Vec3 normal;       // unit, facing the ray origin
    int instance = -1; // -1: ground plane
    std::size_t class_index = 0;
    Vec3 albedo;
    double specular = 0.0;
};

/// Static triangle scene over an optional infinite ground plane z = 0, with
/// a binned-SAH bounding volume hierarchy.
class Scene {
public:
    Scene() = default;
    Scene(std::vector<Triangle> triangles, std::vector<SurfaceInfo> surfaces, bool ground = true);

    [[nodiscard]] std::optional<RayHit> ray_cast(const Vec3& origin, const Vec3& direction) const;
    [[nodiscard]] bool has_ground() const { return ground_; }
    [[nodiscard]] const std::vector<Triangle>& triangles() const { return triangles_; }
    [[nodiscard]] const std::vector<SurfaceInfo>& surfaces() const { return surfaces_; }
    [[nodiscard]] Aabb bounds() const { return nodes_.empty() ? Aabb{} : nodes_.front().box; }
    [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }

    SurfaceInfo ground_surface{0, Vec3(0.40, 0.37, 0.33), 0.25, 2.0, 0.0};

private:
    struct Node {
        Aabb box;
        int first = 0;  // first triangle (leaf) or left child (inner)
        int count = 0;  // > 0 for leaves
    };
    void build(int node, int first, int count, std::vector<Vec3>& centroids, int depth);
    Vec3 shade_albedo(const SurfaceInfo& s, const Vec3& p) const;

    std::vector<Triangle> triangles_;
    std::vector<SurfaceInfo> surfaces_;
    std::vector<Node> nodes_;
    bool ground_ = true;
};

/// Möller-Trumbore; returns the hit distance in (tmin, tmax) or nullopt.
std::optional<double> intersect_triangle(const Triangle& tri, const Vec3& origin, const Vec3& direction,
                                         double tmin = 1e-9, double tmax = std::numeric_limits<double>::infinity());

}  // namespace rubble
