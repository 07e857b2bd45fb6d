#include "rubble/voids.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "rubble/deposition.hpp"

namespace rubble {

VoxelGrid::VoxelGrid(const Vec3& origin_, double resolution_, const Eigen::Vector3i& dims_, bool grounded_)
    : origin(origin_), resolution(resolution_), dims(dims_), grounded(grounded_) {
    solid.assign(static_cast<std::size_t>(dims.x()) * dims.y() * dims.z(), 0);
}

Eigen::Vector3i VoxelGrid::cell(std::size_t idx) const {
    const auto nx = static_cast<std::size_t>(dims.x()), ny = static_cast<std::size_t>(dims.y());
    return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny), static_cast<int>(idx / (nx * ny))};
}

std::size_t VoxelGrid::solid_count() const {
    return static_cast<std::size_t>(std::count(solid.begin(), solid.end(), std::uint8_t{1}));
}

VoxelGrid voxelize(const Pile& pile, double resolution, std::size_t max_cells) {
    if (!(resolution > 0.0)) throw GridError("voxel resolution must be > 0");
    Aabb box = pile.bounds();
    if (box.empty()) box = Aabb{Vec3::Zero(), Vec3::Zero()};
    Vec3 lo = box.lo.array() - resolution;
    Vec3 hi = box.hi.array() + resolution;
    lo.z() = 0.0;
    hi.z() = std::max(box.hi.z(), 0.0) + resolution;
    Eigen::Vector3i dims;
    double total = 1.0;
    for (int a = 0; a < 3; ++a) {
        dims[a] = std::max(1, static_cast<int>(std::ceil((hi[a] - lo[a]) / resolution - 1e-9)));
        total *= dims[a];
    }
    if (total > static_cast<double>(max_cells)) {
        std::ostringstream os;
        os << "voxel grid " << dims.x() << "x" << dims.y() << "x" << dims.z() << " exceeds the cell budget of "
           << max_cells;
        throw GridError(os.str());
    }
    VoxelGrid grid(lo, resolution, dims, true);

    for (std::size_t n = 0; n < pile.instances.size(); ++n) {
        const AssetClass& asset = pile.asset(n);
        const Pose pose = pile.pose(n);
        Aabb wb;
        for (const auto& v : asset.render_mesh->vertices()) wb.grow(pose.apply(v));
        Eigen::Vector3i c0, c1;
        for (int a = 0; a < 3; ++a) {
            c0[a] = std::clamp(static_cast<int>(std::floor((wb.lo[a] - lo[a]) / resolution - 0.5)), 0, dims[a] - 1);
            c1[a] = std::clamp(static_cast<int>(std::ceil((wb.hi[a] - lo[a]) / resolution - 0.5)), 0, dims[a] - 1);
        }
        const Mat3 rt = pose.rotation.transpose();
        for (int k = c0.z(); k <= c1.z(); ++k) {
            for (int j = c0.y(); j <= c1.y(); ++j) {
                for (int i = c0.x(); i <= c1.x(); ++i) {
                    if (grid.is_solid(i, j, k)) continue;
                    if (asset.contains(rt * (grid.center(i, j, k) - pose.position))) grid.set_solid(i, j, k);
                }
            }
        }
    }
    return grid;
}

std::string_view to_string(Openness o) { return o == Openness::Enclosed ? "enclosed" : "vented"; }

namespace {

struct Work {
    Eigen::Vector3i dims;
    std::size_t sx, sy, sz;  // index strides
    std::size_t size;

    explicit Work(const Eigen::Vector3i& d)
        : dims(d), sx(1), sy(static_cast<std::size_t>(d.x())), sz(static_cast<std::size_t>(d.x()) * d.y()),
          size(sz * d.z()) {}

    std::size_t index(int i, int j, int k) const { return i * sx + j * sy + k * sz; }
};

// Marks every cell within Chebyshev distance r of a set cell.
std::vector<std::uint8_t> dilate(const Work& w, std::vector<std::uint8_t> in, int r) {
    if (r <= 0) return in;
    std::vector<std::uint8_t> out(w.size);
    const std::size_t strides[3] = {w.sx, w.sy, w.sz};
    std::vector<int> prefix;
    for (int axis = 0; axis < 3; ++axis) {
        const int n = w.dims[axis];
        const std::size_t stride = strides[axis];
        const int o1 = (axis + 1) % 3, o2 = (axis + 2) % 3;
        prefix.assign(static_cast<std::size_t>(n) + 1, 0);
        for (int b = 0; b < w.dims[o2]; ++b) {
            for (int a = 0; a < w.dims[o1]; ++a) {
                Eigen::Vector3i c = Eigen::Vector3i::Zero();
                c[o1] = a;
                c[o2] = b;
                const std::size_t base = w.index(c.x(), c.y(), c.z());
                for (int t = 0; t < n; ++t) prefix[t + 1] = prefix[t] + in[base + t * stride];
                for (int t = 0; t < n; ++t) {
                    const int lo = std::max(0, t - r), hi = std::min(n, t + r + 1);
                    out[base + t * stride] = prefix[hi] - prefix[lo] > 0 ? 1 : 0;
                }
            }
        }
        std::swap(in, out);
    }
    return in;
}

// 6-connected flood over `passable` cells from the open faces of the box.
std::vector<std::uint8_t> flood_from_border(const Work& w, const std::vector<std::uint8_t>& passable, bool grounded) {
    std::vector<std::uint8_t> seen(w.size, 0);
    std::deque<std::size_t> queue;
    auto push = [&](int i, int j, int k) {
        const std::size_t id = w.index(i, j, k);
        if (passable[id] && !seen[id]) {
            seen[id] = 1;
            queue.push_back(id);
        }
    };
    const int nx = w.dims.x(), ny = w.dims.y(), nz = w.dims.z();
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const bool side = i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
                const bool top = k == nz - 1;
                const bool bottom = k == 0 && !grounded;
                if (side || top || bottom) push(i, j, k);
            }
        }
    }
    while (!queue.empty()) {
        const std::size_t id = queue.front();
        queue.pop_front();
        const int i = static_cast<int>(id % w.sy), j = static_cast<int>((id / w.sy) % ny), k = static_cast<int>(id / w.sz);
        if (i > 0) push(i - 1, j, k);
        if (i < nx - 1) push(i + 1, j, k);
        if (j > 0) push(i, j - 1, k);
        if (j < ny - 1) push(i, j + 1, k);
        if (k > 0) push(i, j, k - 1);
        if (k < nz - 1) push(i, j, k + 1);
    }
    return seen;
}

}  // namespace

VoidAnalysis analyze_voids(const VoxelGrid& grid, double aperture) {
    VoidAnalysis out;
    out.labels.assign(grid.size(), 0);
    if (grid.size() == 0) return out;

    // An opening of w cells survives an opening by radius r iff w > 2r.
    const double width_cells = aperture / grid.resolution;
    const int r = std::max(0, static_cast<int>(std::ceil((width_cells - 1.0) / 2.0 - 1e-9)));

    // Pad so the exterior fill behaves as if the outside went on forever.
    const int pad = r + 1;
    const Eigen::Vector3i offset(pad, pad, grid.grounded ? 0 : pad);
    const Eigen::Vector3i wdims = grid.dims + offset + Eigen::Vector3i(pad, pad, pad);
    const Work w(wdims);
    std::vector<std::uint8_t> solid(w.size, 0), empty(w.size, 1);
    for (int k = 0; k < grid.dims.z(); ++k) {
        for (int j = 0; j < grid.dims.y(); ++j) {
            for (int i = 0; i < grid.dims.x(); ++i) {
                if (!grid.is_solid(i, j, k)) continue;
                const std::size_t id = w.index(i + offset.x(), j + offset.y(), k + offset.z());
                solid[id] = 1;
                empty[id] = 0;
            }
        }
    }

    const auto exterior = flood_from_border(w, empty, grid.grounded);

    auto blocked = dilate(w, solid, r);
    if (grid.grounded) {
        for (int k = 0; k < std::min(r, w.dims.z()); ++k) {
            std::fill_n(blocked.begin() + static_cast<std::ptrdiff_t>(k * w.sz), w.sz, std::uint8_t{1});
        }
    }
    for (auto& b : blocked) b = b ? 0 : 1;  // now: passable
    auto open = dilate(w, flood_from_border(w, blocked, grid.grounded), r);

    // Label components of empty cells outside the opened exterior, in scan order.
    std::vector<int> label(w.size, 0);
    std::deque<std::size_t> queue;
    const int nx = w.dims.x(), ny = w.dims.y(), nz = w.dims.z();
    for (int k = 0; k < grid.dims.z(); ++k) {
        for (int j = 0; j < grid.dims.y(); ++j) {
            for (int i = 0; i < grid.dims.x(); ++i) {
                const std::size_t start = w.index(i + offset.x(), j + offset.y(), k + offset.z());
                if (!empty[start] || open[start] || label[start]) continue;
                VoidRegion region;
                region.id = static_cast<int>(out.regions.size()) + 1;
                region.seed = Eigen::Vector3i(i, j, k);
                region.openness = Openness::Enclosed;
                label[start] = region.id;
                queue.push_back(start);
                while (!queue.empty()) {
                    const std::size_t id = queue.front();
                    queue.pop_front();
                    ++region.voxels;
                    if (exterior[id]) region.openness = Openness::Vented;
                    const int ci = static_cast<int>(id % w.sy), cj = static_cast<int>((id / w.sy) % ny),
                              ck = static_cast<int>(id / w.sz);
                    const Vec3 lo = grid.origin + grid.resolution * Vec3(ci - offset.x(), cj - offset.y(), ck - offset.z());
                    region.bounds.grow(lo);
                    region.bounds.grow(lo + Vec3::Constant(grid.resolution));
                    auto visit = [&](int a, int b, int c) {
                        const std::size_t n = w.index(a, b, c);
                        if (empty[n] && !open[n] && !label[n]) {
                            label[n] = region.id;
                            queue.push_back(n);
                        }
                    };
                    if (ci > 0) visit(ci - 1, cj, ck);
                    if (ci < nx - 1) visit(ci + 1, cj, ck);
                    if (cj > 0) visit(ci, cj - 1, ck);
                    if (cj < ny - 1) visit(ci, cj + 1, ck);
                    if (ck > 0) visit(ci, cj, ck - 1);
                    if (ck < nz - 1) visit(ci, cj, ck + 1);
                }
                region.volume = static_cast<double>(region.voxels) * std::pow(grid.resolution, 3);
                out.regions.push_back(region);
            }
        }
    }

    // Scan order already breaks ties by seed; a stable sort keeps it.
    std::vector<int> order(out.regions.size());
    for (std::size_t n = 0; n < order.size(); ++n) order[n] = static_cast<int>(n);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return out.regions[a].voxels > out.regions[b].voxels; });
    std::vector<int> renumber(out.regions.size() + 1, 0);
    std::vector<VoidRegion> sorted;
    sorted.reserve(order.size());
    for (int n : order) {
        sorted.push_back(out.regions[n]);
        sorted.back().id = static_cast<int>(sorted.size());
        renumber[out.regions[n].id] = sorted.back().id;
    }
    out.regions = std::move(sorted);

    for (int k = 0; k < grid.dims.z(); ++k) {
        for (int j = 0; j < grid.dims.y(); ++j) {
            for (int i = 0; i < grid.dims.x(); ++i) {
                const std::size_t id = w.index(i + offset.x(), j + offset.y(), k + offset.z());
                int& dst = out.labels[grid.index(i, j, k)];
                if (solid[id]) {
                    dst = -1;
                    ++out.solid_cells;
                } else if (label[id]) {
                    dst = renumber[label[id]];
                    ++out.void_cells;
                } else {
                    dst = 0;
                    ++out.exterior_cells;
                }
            }
        }
    }
    return out;
}

}  // namespace rubble
