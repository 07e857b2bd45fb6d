#include "rubble/polyhedron.hpp"

#include <map>
#include <set>

#include "rubble/error.hpp"

namespace rubble {

namespace {

struct Tri {
    std::array<int, 3> v;
    Vec3 n;
    double d;
    bool alive = true;
};

Tri make_tri(const std::vector<Vec3>& p, int a, int b, int c) {
    Tri t{{a, b, c}, (p[b] - p[a]).cross(p[c] - p[a]), 0.0};
    t.n.normalize();
    t.d = t.n.dot(p[a]);
    return t;
}

}  // namespace

ConvexPolyhedron ConvexPolyhedron::hull(std::span<const Vec3> input) {
    std::vector<Vec3> p(input.begin(), input.end());
    if (p.size() < 4) throw AssetError("convex hull needs at least 4 vertices");

    Aabb box;
    for (const auto& x : p) box.grow(x);
    const double scale = std::max(box.extent().maxCoeff(), 1e-12);
    const double eps = 1e-9 * scale;

    // Initial tetrahedron from extreme points.
    int i0 = 0;
    for (int i = 1; i < static_cast<int>(p.size()); ++i) {
        if (p[i].x() < p[i0].x()) i0 = i;
    }
    int i1 = i0;
    double best = 0.0;
    for (int i = 0; i < static_cast<int>(p.size()); ++i) {
        const double d = (p[i] - p[i0]).squaredNorm();
        if (d > best) best = d, i1 = i;
    }
    int i2 = i0;
    best = 0.0;
    const Vec3 axis = (p[i1] - p[i0]).normalized();
    for (int i = 0; i < static_cast<int>(p.size()); ++i) {
        const double d = (p[i] - p[i0]).cross(axis).squaredNorm();
        if (d > best) best = d, i2 = i;
    }
    int i3 = i0;
    best = 0.0;
    const Vec3 pn = (p[i1] - p[i0]).cross(p[i2] - p[i0]).normalized();
    for (int i = 0; i < static_cast<int>(p.size()); ++i) {
        const double d = std::abs((p[i] - p[i0]).dot(pn));
        if (d > best) best = d, i3 = i;
    }
    if (i1 == i0 || i2 == i0 || best <= 1e-6 * scale) {
        throw AssetError("convex hull vertices are coplanar or degenerate");
    }

    const Vec3 interior = 0.25 * (p[i0] + p[i1] + p[i2] + p[i3]);
    std::vector<Tri> tris;
    auto add = [&](int a, int b, int c) {
        Tri t = make_tri(p, a, b, c);
        if (t.n.dot(interior) - t.d > 0.0) {
            t = make_tri(p, a, c, b);
        }
        tris.push_back(t);
    };
    add(i0, i1, i2);
    add(i0, i1, i3);
    add(i0, i2, i3);
    add(i1, i2, i3);

    for (int pi = 0; pi < static_cast<int>(p.size()); ++pi) {
        if (pi == i0 || pi == i1 || pi == i2 || pi == i3) continue;
        std::vector<int> visible;
        for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
            if (tris[t].alive && tris[t].n.dot(p[pi]) - tris[t].d > eps) visible.push_back(t);
        }
        if (visible.empty()) continue;
        std::set<std::pair<int, int>> directed;
        for (int t : visible) {
            const auto& v = tris[t].v;
            for (int k = 0; k < 3; ++k) directed.insert({v[k], v[(k + 1) % 3]});
        }
        std::vector<std::pair<int, int>> horizon;
        for (const auto& e : directed) {
            if (!directed.count({e.second, e.first})) horizon.push_back(e);
        }
        for (int t : visible) tris[t].alive = false;
        for (const auto& [a, b] : horizon) {
            tris.push_back(make_tri(p, a, b, pi));
        }
    }

    // Merge coplanar triangles into polygon faces.
    ConvexPolyhedron out;
    std::vector<int> remap(p.size(), -1);
    auto vid = [&](int i) {
        if (remap[i] < 0) {
            remap[i] = static_cast<int>(out.vertices_.size());
            out.vertices_.push_back(p[i]);
        }
        return remap[i];
    };
    std::vector<bool> used(tris.size(), false);
    for (std::size_t t = 0; t < tris.size(); ++t) {
        if (!tris[t].alive || used[t]) continue;
        std::set<int> ids;
        Vec3 nsum = Vec3::Zero();
        for (std::size_t u = t; u < tris.size(); ++u) {
            if (!tris[u].alive || used[u]) continue;
            if (tris[u].n.dot(tris[t].n) > 1.0 - 1e-9 && std::abs(tris[u].d - tris[t].d) < 1e-7 * scale) {
                used[u] = true;
                nsum += tris[u].n;
                for (int v : tris[u].v) ids.insert(v);
            }
        }
        HullFace face;
        face.normal = nsum.normalized();
        Vec3 c = Vec3::Zero();
        for (int v : ids) c += p[v];
        c /= static_cast<double>(ids.size());
        Vec3 u, w;
        tangent_basis(face.normal, u, w);
        std::vector<std::pair<double, int>> ring;
        for (int v : ids) {
            const Vec3 r = p[v] - c;
            ring.push_back({std::atan2(r.dot(w), r.dot(u)), v});
        }
        std::sort(ring.begin(), ring.end());
        // Drop vertices collinear with their neighbours.
        std::vector<int> loop;
        for (std::size_t k = 0; k < ring.size(); ++k) {
            const Vec3& prev = p[ring[(k + ring.size() - 1) % ring.size()].second];
            const Vec3& cur = p[ring[k].second];
            const Vec3& next = p[ring[(k + 1) % ring.size()].second];
            if ((cur - prev).cross(next - cur).norm() > 1e-9 * scale * scale) loop.push_back(ring[k].second);
        }
        for (int v : loop) face.verts.push_back(vid(v));
        // u x w == normal, so increasing angle is counter-clockwise from outside.
        face.offset = face.normal.dot(c);
        out.faces_.push_back(std::move(face));
    }
    out.finalize();
    return out;
}

ConvexPolyhedron ConvexPolyhedron::box(const Vec3& h) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 8; ++i) {
        pts.emplace_back((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
    }
    return hull(pts);
}

ConvexPolyhedron ConvexPolyhedron::prism(double radius, double height, int segments) {
    std::vector<Vec3> pts;
    for (int i = 0; i < segments; ++i) {
        const double a = 2.0 * kPi * i / segments;
        pts.emplace_back(radius * std::cos(a), radius * std::sin(a), -0.5 * height);
        pts.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.5 * height);
    }
    return hull(pts);
}

void ConvexPolyhedron::finalize() {
    std::map<std::pair<int, int>, HullEdge> edges;
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) {
        const auto& v = faces_[f].verts;
        for (std::size_t k = 0; k < v.size(); ++k) {
            const int a = v[k], b = v[(k + 1) % v.size()];
            const auto key = std::minmax(a, b);
            auto it = edges.find(key);
            if (it == edges.end()) {
                edges.emplace(key, HullEdge{a, b, f, -1});
            } else {
                it->second.f1 = f;
            }
        }
    }
    edges_.clear();
    for (const auto& [key, e] : edges) {
        if (e.f1 < 0) throw AssetError("convex hull is not closed");
        edges_.push_back(e);
    }
    radius_ = 0.0;
    for (const auto& v : vertices_) radius_ = std::max(radius_, v.norm());
}

bool ConvexPolyhedron::contains(const Vec3& p, double eps) const {
    for (const auto& f : faces_) {
        if (f.normal.dot(p) - f.offset > eps) return false;
    }
    return true;
}

Vec3 ConvexPolyhedron::support(const Vec3& dir) const {
    int best = 0;
    double best_d = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(vertices_.size()); ++i) {
        const double d = vertices_[i].dot(dir);
        if (d > best_d) best_d = d, best = i;
    }
    return vertices_[best];
}

MassProperties ConvexPolyhedron::mass_properties() const {
    // Signed tetrahedra against the origin; second moments via the
    // canonical-tetrahedron covariance.
    MassProperties mp;
    Mat3 covariance = Mat3::Zero();
    Mat3 canonical;
    canonical << 2, 1, 1, 1, 2, 1, 1, 1, 2;
    canonical /= 120.0;
    for (const auto& tri : triangles()) {
        Mat3 a;
        a.col(0) = vertices_[tri[0]];
        a.col(1) = vertices_[tri[1]];
        a.col(2) = vertices_[tri[2]];
        const double det = a.determinant();
        mp.volume += det / 6.0;
        mp.centroid += det / 24.0 * (a.col(0) + a.col(1) + a.col(2));
        covariance += det * a * canonical * a.transpose();
    }
    mp.centroid /= mp.volume;
    // Shift covariance to the centroid, then convert to an inertia tensor.
    covariance -= mp.volume * mp.centroid * mp.centroid.transpose();
    mp.inertia = Mat3::Identity() * covariance.trace() - covariance;
    return mp;
}

std::vector<std::array<int, 3>> ConvexPolyhedron::triangles() const {
    std::vector<std::array<int, 3>> out;
    for (const auto& f : faces_) {
        for (std::size_t k = 1; k + 1 < f.verts.size(); ++k) {
            out.push_back({f.verts[0], f.verts[k], f.verts[k + 1]});
        }
    }
    return out;
}

ConvexPolyhedron ConvexPolyhedron::transformed(const Mat3& rotation, const Vec3& origin) const {
    ConvexPolyhedron out = *this;
    for (auto& v : out.vertices_) v = rotation * (v - origin);
    for (auto& f : out.faces_) {
        f.normal = rotation * f.normal;
        f.offset = f.normal.dot(out.vertices_[f.verts[0]]);
    }
    out.radius_ = 0.0;
    for (const auto& v : out.vertices_) out.radius_ = std::max(out.radius_, v.norm());
    return out;
}

}  // namespace rubble
