#include "rubble/bvh.hpp"

#include <array>

#include "rubble/noise.hpp"

namespace rubble {

namespace {

constexpr int kBins = 12;
constexpr int kLeafSize = 4;

double surface_area(const Aabb& b) {
    if (b.empty()) return 0.0;
    const Vec3 e = b.extent();
    return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.z() * e.x());
}

bool slab_test(const Aabb& box, const Vec3& origin, const Vec3& inv_dir, double tmax, double& tnear) {
    double t0 = 0.0, t1 = tmax;
    for (int a = 0; a < 3; ++a) {
        double lo = (box.lo[a] - origin[a]) * inv_dir[a];
        double hi = (box.hi[a] - origin[a]) * inv_dir[a];
        if (lo > hi) std::swap(lo, hi);
        // NaN (0 * inf) leaves the interval untouched.
        if (lo > t0) t0 = lo;
        if (hi < t1) t1 = hi;
        if (t0 > t1) return false;
    }
    tnear = t0;
    return true;
}

}  // namespace

std::optional<double> intersect_triangle(const Triangle& tri, const Vec3& origin, const Vec3& dir, double tmin,
                                         double tmax) {
    const Vec3 e1 = tri.v1 - tri.v0;
    const Vec3 e2 = tri.v2 - tri.v0;
    const Vec3 p = dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-14) return std::nullopt;
    const double inv = 1.0 / det;
    const Vec3 s = origin - tri.v0;
    const double u = s.dot(p) * inv;
    if (u < 0.0 || u > 1.0) return std::nullopt;
    const Vec3 q = s.cross(e1);
    const double v = dir.dot(q) * inv;
    if (v < 0.0 || u + v > 1.0) return std::nullopt;
    const double t = e2.dot(q) * inv;
    if (t <= tmin || t >= tmax) return std::nullopt;
    return t;
}

Scene::Scene(std::vector<Triangle> triangles, std::vector<SurfaceInfo> surfaces, bool ground)
    : triangles_(std::move(triangles)), surfaces_(std::move(surfaces)), ground_(ground) {
    if (triangles_.empty()) return;
    std::vector<Vec3> centroids(triangles_.size());
    for (std::size_t i = 0; i < triangles_.size(); ++i) {
        centroids[i] = (triangles_[i].v0 + triangles_[i].v1 + triangles_[i].v2) / 3.0;
    }
    nodes_.reserve(2 * triangles_.size() / kLeafSize + 1);
    nodes_.push_back({});
    build(0, 0, static_cast<int>(triangles_.size()), centroids, 0);
}

void Scene::build(int node, int first, int count, std::vector<Vec3>& centroids, int depth) {
    Aabb box, cbox;
    for (int i = first; i < first + count; ++i) {
        box.grow(triangles_[i].v0);
        box.grow(triangles_[i].v1);
        box.grow(triangles_[i].v2);
        cbox.grow(centroids[i]);
    }
    nodes_[node].box = box;
    nodes_[node].first = first;
    nodes_[node].count = count;
    if (count <= kLeafSize || depth > 60) return;

    int best_axis = -1, best_split = 0;
    double best_cost = count * surface_area(box);
    for (int axis = 0; axis < 3; ++axis) {
        const double lo = cbox.lo[axis], hi = cbox.hi[axis];
        if (hi - lo < 1e-12) continue;
        std::array<Aabb, kBins> bins{};
        std::array<int, kBins> counts{};
        const double scale = kBins / (hi - lo);
        for (int i = first; i < first + count; ++i) {
            const int b = std::min(kBins - 1, static_cast<int>((centroids[i][axis] - lo) * scale));
            ++counts[b];
            bins[b].grow(triangles_[i].v0);
            bins[b].grow(triangles_[i].v1);
            bins[b].grow(triangles_[i].v2);
        }
        std::array<double, kBins - 1> left_area{}, right_area{};
        std::array<int, kBins - 1> left_count{}, right_count{};
        Aabb acc;
        int n = 0;
        for (int b = 0; b < kBins - 1; ++b) {
            acc.grow(bins[b]);
            n += counts[b];
            left_area[b] = surface_area(acc);
            left_count[b] = n;
        }
        acc = Aabb{};
        n = 0;
        for (int b = kBins - 1; b > 0; --b) {
            acc.grow(bins[b]);
            n += counts[b];
            right_area[b - 1] = surface_area(acc);
            right_count[b - 1] = n;
        }
        for (int b = 0; b < kBins - 1; ++b) {
            if (left_count[b] == 0 || right_count[b] == 0) continue;
            const double cost = 0.125 * surface_area(box) + left_count[b] * left_area[b] + right_count[b] * right_area[b];
            if (cost < best_cost) {
                best_cost = cost;
                best_axis = axis;
                best_split = b;
            }
        }
    }
    if (best_axis < 0) return;

    const double lo = cbox.lo[best_axis];
    const double scale = kBins / (cbox.hi[best_axis] - lo);
    int mid = first;
    for (int i = first; i < first + count; ++i) {
        const int b = std::min(kBins - 1, static_cast<int>((centroids[i][best_axis] - lo) * scale));
        if (b <= best_split) {
            std::swap(triangles_[i], triangles_[mid]);
            std::swap(centroids[i], centroids[mid]);
            ++mid;
        }
    }
    if (mid == first || mid == first + count) return;

    const int left = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_.push_back({});
    nodes_[node].first = left;
    nodes_[node].count = 0;
    build(left, first, mid - first, centroids, depth + 1);
    build(left + 1, mid, first + count - mid, centroids, depth + 1);
}

Vec3 Scene::shade_albedo(const SurfaceInfo& s, const Vec3& p) const {
    if (s.texture_amplitude <= 0.0) return s.albedo;
    const double n = fractal_noise(p * s.texture_scale, static_cast<std::uint32_t>(s.class_index + 7));
    const double f = 1.0 + s.texture_amplitude * (2.0 * n - 1.0);
    return (s.albedo * f).cwiseMax(0.0).cwiseMin(1.0);
}

std::optional<RayHit> Scene::ray_cast(const Vec3& origin, const Vec3& dir) const {
    double best_t = std::numeric_limits<double>::infinity();
    int best_tri = -1;
    if (!nodes_.empty()) {
        const Vec3 inv_dir = dir.cwiseInverse();
        int stack[128];
        int top = 0;
        double tnear = 0.0;
        if (slab_test(nodes_[0].box, origin, inv_dir, best_t, tnear)) stack[top++] = 0;
        while (top > 0) {
            const Node& n = nodes_[stack[--top]];
            if (n.count > 0) {
                for (int i = n.first; i < n.first + n.count; ++i) {
                    if (auto t = intersect_triangle(triangles_[i], origin, dir, 1e-9, best_t)) {
                        best_t = *t;
                        best_tri = i;
                    }
                }
                continue;
            }
            double t_left = 0.0, t_right = 0.0;
            const bool hit_left = slab_test(nodes_[n.first].box, origin, inv_dir, best_t, t_left);
            const bool hit_right = slab_test(nodes_[n.first + 1].box, origin, inv_dir, best_t, t_right);
            if (hit_left && hit_right) {
                // Push the far child first so the near one is visited first.
                if (t_left <= t_right) {
                    stack[top++] = n.first + 1;
                    stack[top++] = n.first;
                } else {
                    stack[top++] = n.first;
                    stack[top++] = n.first + 1;
                }
            } else if (hit_left) {
                stack[top++] = n.first;
            } else if (hit_right) {
                stack[top++] = n.first + 1;
            }
        }
    }
    bool ground_hit = false;
    if (ground_ && dir.z() < 0.0 && origin.z() > 0.0) {
        const double t = -origin.z() / dir.z();
        if (t < best_t) {
            best_t = t;
            ground_hit = true;
        }
    }
    if (!ground_hit && best_tri < 0) return std::nullopt;

    RayHit hit;
    hit.distance = best_t;
    hit.point = origin + best_t * dir;
    if (ground_hit) {
        hit.normal = Vec3::UnitZ();
        hit.instance = -1;
        hit.class_index = 0;
        hit.albedo = shade_albedo(ground_surface, hit.point);
        hit.specular = ground_surface.specular;
    } else {
        const Triangle& tri = triangles_[best_tri];
        hit.normal = tri.normal.dot(dir) > 0.0 ? Vec3(-tri.normal) : tri.normal;
        hit.instance = tri.instance;
        static const SurfaceInfo fallback{};
        const bool known = tri.instance >= 0 && static_cast<std::size_t>(tri.instance) < surfaces_.size();
        const SurfaceInfo& s = known ? surfaces_[static_cast<std::size_t>(tri.instance)] : fallback;
        hit.class_index = s.class_index;
        hit.albedo = shade_albedo(s, hit.point);
        hit.specular = s.specular;
    }
    return hit;
}

}  // namespace rubble
