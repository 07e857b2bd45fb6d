#include "rubble/collision.hpp"

#include <vector>

namespace rubble {

namespace {

struct FaceQuery {
    int index = -1;
    double separation = -std::numeric_limits<double>::infinity();
};

struct EdgeQuery {
    int edge_a = -1, edge_b = -1;
    Vec3 axis = Vec3::Zero();
    double separation = -std::numeric_limits<double>::infinity();
};

// Relative placement of B expressed in A's local frame.
struct Relative {
    Mat3 rotation;
    Vec3 translation;
};

struct Scratch {
    std::vector<Vec3> b_in_a, a_in_b, b_normals;
    std::vector<Vec3> clip_in, clip_out;
    std::vector<ContactPoint> candidates;
};

Scratch& scratch() {
    thread_local Scratch s;
    return s;
}

FaceQuery query_faces(const ConvexPolyhedron& ref, const std::vector<Vec3>& other_verts, double margin) {
    FaceQuery best;
    const auto& faces = ref.faces();
    for (int i = 0; i < static_cast<int>(faces.size()); ++i) {
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& v : other_verts) lo = std::min(lo, faces[i].normal.dot(v));
        const double sep = lo - faces[i].offset;
        if (sep > best.separation) {
            best.separation = sep;
            best.index = i;
            if (sep > margin) break;
        }
    }
    return best;
}

EdgeQuery query_edges(const ConvexPolyhedron& a, const ConvexPolyhedron& b, const std::vector<Vec3>& b_in_a,
                      const std::vector<Vec3>& b_normals, double margin) {
    // Edge pairs whose Gauss-map arcs cross; the arc of B is negated.
    thread_local std::vector<Vec3> b_arc;
    b_arc.resize(b.edges().size());
    for (std::size_t j = 0; j < b.edges().size(); ++j) {
        const HullEdge& eb = b.edges()[j];
        b_arc[j] = b_normals[eb.f1].cross(b_normals[eb.f0]);
    }
    EdgeQuery best;
    const auto& av = a.vertices();
    const auto& af = a.faces();
    for (int i = 0; i < static_cast<int>(a.edges().size()); ++i) {
        const HullEdge& ea = a.edges()[i];
        const Vec3& na0 = af[ea.f0].normal;
        const Vec3& na1 = af[ea.f1].normal;
        const Vec3 a_arc = na1.cross(na0);
        const Vec3& pa = av[ea.v0];
        const Vec3 da = av[ea.v1] - pa;
        for (int j = 0; j < static_cast<int>(b.edges().size()); ++j) {
            const HullEdge& eb = b.edges()[j];
            const double cba = -b_normals[eb.f0].dot(a_arc);
            const double dba = -b_normals[eb.f1].dot(a_arc);
            if (cba * dba >= 0.0) continue;
            const double adc = na0.dot(b_arc[j]);
            const double bdc = na1.dot(b_arc[j]);
            if (adc * bdc >= 0.0 || cba * bdc <= 0.0) continue;
            const Vec3& pb = b_in_a[eb.v0];
            const Vec3 db = b_in_a[eb.v1] - pb;
            Vec3 axis = da.cross(db);
            const double len = axis.norm();
            if (len < 1e-6 * da.norm() * db.norm()) continue;
            axis /= len;
            if (axis.dot(pa) < 0.0) axis = -axis;  // A's origin is interior
            const double sep = axis.dot(pb - pa);
            if (sep > best.separation) {
                best.separation = sep;
                best.edge_a = i;
                best.edge_b = j;
                best.axis = axis;
                if (sep > margin) return best;
            }
        }
    }
    return best;
}

// Keeps at most four points maximizing the covered area.
void reduce(std::vector<ContactPoint>& pts, const Vec3& normal, Manifold& out) {
    out.count = 0;
    if (pts.empty()) return;
    if (pts.size() <= 4) {
        for (const auto& p : pts) out.points[out.count++] = p;
        return;
    }
    int i0 = 0;
    for (int i = 1; i < static_cast<int>(pts.size()); ++i) {
        if (pts[i].separation < pts[i0].separation) i0 = i;
    }
    int i1 = -1;
    double best = -1.0;
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
        const double d = (pts[i].position - pts[i0].position).squaredNorm();
        if (d > best) best = d, i1 = i;
    }
    int i2 = -1;
    best = -1.0;
    const Vec3 e01 = pts[i1].position - pts[i0].position;
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
        const double area = std::abs(e01.cross(pts[i].position - pts[i0].position).dot(normal));
        if (area > best) best = area, i2 = i;
    }
    // Orient the triangle counter-clockwise around the normal.
    const Vec3& p0 = pts[i0].position;
    const Vec3& p1 = pts[i1].position;
    const Vec3& p2 = pts[i2].position;
    const double sign = (p1 - p0).cross(p2 - p0).dot(normal) >= 0.0 ? 1.0 : -1.0;
    int i3 = -1;
    best = 0.0;
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
        const Vec3& q = pts[i].position;
        const double s = std::min({(p1 - p0).cross(q - p0).dot(normal), (p2 - p1).cross(q - p1).dot(normal),
                                   (p0 - p2).cross(q - p2).dot(normal)}) * sign;
        if (s < best) best = s, i3 = i;
    }
    out.points[out.count++] = pts[i0];
    out.points[out.count++] = pts[i1];
    if (i2 != i0 && i2 != i1) out.points[out.count++] = pts[i2];
    if (i3 >= 0 && i3 != i0 && i3 != i1 && i3 != i2) out.points[out.count++] = pts[i3];
}

// Clips the incident face of `inc` against the reference face of `ref`.
// Everything is expressed in the reference body's local frame.
void face_contact(const ConvexPolyhedron& ref, int ref_face, const std::vector<Vec3>& inc_verts,
                  const std::vector<Vec3>& inc_normals, const ConvexPolyhedron& inc, double margin,
                  std::vector<ContactPoint>& out) {
    Scratch& s = scratch();
    const HullFace& rf = ref.faces()[ref_face];
    int inc_face = 0;
    double lowest = std::numeric_limits<double>::infinity();
    for (int j = 0; j < static_cast<int>(inc.faces().size()); ++j) {
        const double d = inc_normals[j].dot(rf.normal);
        if (d < lowest) lowest = d, inc_face = j;
    }
    s.clip_in.clear();
    for (int v : inc.faces()[inc_face].verts) s.clip_in.push_back(inc_verts[v]);

    const auto& rv = ref.vertices();
    const auto& loop = rf.verts;
    for (std::size_t k = 0; k < loop.size() && !s.clip_in.empty(); ++k) {
        const Vec3& v0 = rv[loop[k]];
        const Vec3& v1 = rv[loop[(k + 1) % loop.size()]];
        const Vec3 side = (v1 - v0).cross(rf.normal);
        const double off = side.dot(v0);
        s.clip_out.clear();
        for (std::size_t m = 0; m < s.clip_in.size(); ++m) {
            const Vec3& p = s.clip_in[m];
            const Vec3& q = s.clip_in[(m + 1) % s.clip_in.size()];
            const double dp = side.dot(p) - off;
            const double dq = side.dot(q) - off;
            if (dp <= 0.0) s.clip_out.push_back(p);
            if ((dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0)) {
                s.clip_out.push_back(p + (q - p) * (dp / (dp - dq)));
            }
        }
        std::swap(s.clip_in, s.clip_out);
    }
    out.clear();
    for (const auto& p : s.clip_in) {
        const double sep = rf.normal.dot(p) - rf.offset;
        if (sep <= margin) out.push_back({p - 0.5 * sep * rf.normal, sep});
    }
}

void closest_points_segments(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2, Vec3& c1, Vec3& c2) {
    const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
    const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
    const double c = d1.dot(r), b = d1.dot(d2);
    const double denom = a * e - b * b;
    double s = denom > 1e-14 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
    double t = (b * s + f) / e;
    if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
    } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
    }
    c1 = p1 + d1 * s;
    c2 = p2 + d2 * t;
}

double projected_gap(const ConvexPolyhedron& a, const std::vector<Vec3>& b_in_a, const Vec3& axis) {
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& v : a.vertices()) hi = std::max(hi, axis.dot(v));
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& v : b_in_a) lo = std::min(lo, axis.dot(v));
    return lo - hi;
}

// Separation along the cached feature, exact for the axis it names.
double hinted_separation(const ConvexPolyhedron& a, const ConvexPolyhedron& b, const Relative& rel,
                         const std::vector<Vec3>& b_in_a, const SeparatingAxis& hint) {
    switch (hint.kind) {
    case SeparatingAxis::FaceA: {
        const auto& f = a.faces()[hint.i];
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& v : b_in_a) lo = std::min(lo, f.normal.dot(v));
        return lo - f.offset;
    }
    case SeparatingAxis::FaceB: {
        const auto& f = b.faces()[hint.i];
        const Vec3 n = rel.rotation * f.normal;
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& v : a.vertices()) lo = std::min(lo, n.dot(v));
        return lo - f.offset - n.dot(rel.translation);
    }
    case SeparatingAxis::Edges: {
        const HullEdge& ea = a.edges()[hint.i];
        const HullEdge& eb = b.edges()[hint.j];
        const Vec3 da = a.vertices()[ea.v1] - a.vertices()[ea.v0];
        const Vec3 db = b_in_a[eb.v1] - b_in_a[eb.v0];
        Vec3 axis = da.cross(db);
        const double len = axis.norm();
        if (len < 1e-6 * da.norm() * db.norm()) return -std::numeric_limits<double>::infinity();
        axis /= len;
        return std::max(projected_gap(a, b_in_a, axis), projected_gap(a, b_in_a, -axis));
    }
    default:
        return -std::numeric_limits<double>::infinity();
    }
}

void relative(const Pose& pa, const Pose& pb, Relative& r) {
    r.rotation = pa.rotation.transpose() * pb.rotation;
    r.translation = pa.rotation.transpose() * (pb.position - pa.position);
}

}  // namespace

bool collide(const ConvexPolyhedron& a, const Pose& pa, const ConvexPolyhedron& b, const Pose& pb, double margin,
             Manifold& out, SeparatingAxis* hint) {
    out.count = 0;
    Scratch& s = scratch();
    Relative rel;
    relative(pa, pb, rel);

    s.b_in_a.resize(b.vertices().size());
    for (std::size_t i = 0; i < b.vertices().size(); ++i) s.b_in_a[i] = rel.rotation * b.vertices()[i] + rel.translation;
    if (hint && hint->kind != SeparatingAxis::None && hinted_separation(a, b, rel, s.b_in_a, *hint) > margin) {
        return false;
    }
    auto separated = [&](SeparatingAxis::Kind kind, int i, int j) {
        if (hint) *hint = {kind, i, j};
        return false;
    };
    if (hint) *hint = {};

    const FaceQuery fa = query_faces(a, s.b_in_a, margin);
    if (fa.separation > margin) return separated(SeparatingAxis::FaceA, fa.index, -1);

    s.a_in_b.resize(a.vertices().size());
    const Mat3 rt = rel.rotation.transpose();
    for (std::size_t i = 0; i < a.vertices().size(); ++i) s.a_in_b[i] = rt * (a.vertices()[i] - rel.translation);
    const FaceQuery fb = query_faces(b, s.a_in_b, margin);
    if (fb.separation > margin) return separated(SeparatingAxis::FaceB, fb.index, -1);

    s.b_normals.resize(b.faces().size());
    for (std::size_t i = 0; i < b.faces().size(); ++i) s.b_normals[i] = rel.rotation * b.faces()[i].normal;
    const EdgeQuery eq = query_edges(a, b, s.b_in_a, s.b_normals, margin);
    if (eq.separation > margin) return separated(SeparatingAxis::Edges, eq.edge_a, eq.edge_b);

    constexpr double kRelEdgeTolerance = 0.90;
    constexpr double kRelFaceTolerance = 0.98;
    constexpr double kAbsTolerance = 0.0025;
    const double face_max = std::max(fa.separation, fb.separation);

    if (eq.edge_a >= 0 && eq.separation > kRelEdgeTolerance * face_max + kAbsTolerance) {
        const HullEdge& ea = a.edges()[eq.edge_a];
        const HullEdge& eb = b.edges()[eq.edge_b];
        Vec3 ca, cb;
        closest_points_segments(a.vertices()[ea.v0], a.vertices()[ea.v1], s.b_in_a[eb.v0], s.b_in_a[eb.v1], ca, cb);
        out.normal = pa.rotation * eq.axis;
        out.points[0] = {pa.apply(0.5 * (ca + cb)), eq.separation};
        out.count = 1;
        return true;
    }

    if (fb.separation > kRelFaceTolerance * fa.separation + kAbsTolerance) {
        // Reference face on B, worked in B's frame.
        s.b_normals.resize(a.faces().size());
        for (std::size_t i = 0; i < a.faces().size(); ++i) s.b_normals[i] = rt * a.faces()[i].normal;
        face_contact(b, fb.index, s.a_in_b, s.b_normals, a, margin, s.candidates);
        for (auto& c : s.candidates) c.position = pb.apply(c.position);
        const Vec3 n = -(pb.rotation * b.faces()[fb.index].normal);
        out.normal = n;
        reduce(s.candidates, n, out);
    } else {
        face_contact(a, fa.index, s.b_in_a, s.b_normals, b, margin, s.candidates);
        for (auto& c : s.candidates) c.position = pa.apply(c.position);
        const Vec3 n = pa.rotation * a.faces()[fa.index].normal;
        out.normal = n;
        reduce(s.candidates, n, out);
    }
    return out.count > 0;
}

bool collide_ground(const ConvexPolyhedron& b, const Pose& pb, double margin, Manifold& out) {
    out.count = 0;
    Scratch& s = scratch();
    s.candidates.clear();
    for (const auto& v : b.vertices()) {
        const Vec3 w = pb.apply(v);
        if (w.z() <= margin) {
            s.candidates.push_back({Vec3(w.x(), w.y(), 0.5 * w.z()), w.z()});
        }
    }
    out.normal = Vec3::UnitZ();
    reduce(s.candidates, out.normal, out);
    return out.count > 0;
}

double separation(const ConvexPolyhedron& a, const Pose& pa, const ConvexPolyhedron& b, const Pose& pb) {
    Scratch& s = scratch();
    Relative rel;
    relative(pa, pb, rel);
    constexpr double kNoEarlyOut = std::numeric_limits<double>::infinity();
    s.b_in_a.resize(b.vertices().size());
    for (std::size_t i = 0; i < b.vertices().size(); ++i) s.b_in_a[i] = rel.rotation * b.vertices()[i] + rel.translation;
    const FaceQuery fa = query_faces(a, s.b_in_a, kNoEarlyOut);
    s.a_in_b.resize(a.vertices().size());
    const Mat3 rt = rel.rotation.transpose();
    for (std::size_t i = 0; i < a.vertices().size(); ++i) s.a_in_b[i] = rt * (a.vertices()[i] - rel.translation);
    const FaceQuery fb = query_faces(b, s.a_in_b, kNoEarlyOut);
    s.b_normals.resize(b.faces().size());
    for (std::size_t i = 0; i < b.faces().size(); ++i) s.b_normals[i] = rel.rotation * b.faces()[i].normal;
    const EdgeQuery eq = query_edges(a, b, s.b_in_a, s.b_normals, kNoEarlyOut);
    return std::max({fa.separation, fb.separation, eq.separation});
}

}  // namespace rubble
