#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "rubble/error.hpp"
#include "rubble/math.hpp"

namespace rubble {

struct Pile;

class GridError : public Error {
public:
    using Error::Error;
};

/// Dense occupancy grid. Cell (i, j, k) spans origin + [i, i+1) * resolution
/// along each axis.
///
/// A grounded grid starts at the ground plane: its bottom face is the
/// ground, not open air, so flood fills never enter from below.
struct VoxelGrid {
    Vec3 origin = Vec3::Zero();
    double resolution = 0.1;
    Eigen::Vector3i dims = Eigen::Vector3i::Zero();
    std::vector<std::uint8_t> solid;  // 0 or 1, x fastest
    bool grounded = false;

    VoxelGrid() = default;
    VoxelGrid(const Vec3& origin, double resolution, const Eigen::Vector3i& dims, bool grounded = false);

    [[nodiscard]] std::size_t size() const { return solid.size(); }
    [[nodiscard]] std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims.x()) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims.y()) * static_cast<std::size_t>(k));
    }
    [[nodiscard]] Eigen::Vector3i cell(std::size_t index) const;
    [[nodiscard]] bool is_solid(int i, int j, int k) const { return solid[index(i, j, k)] != 0; }
    void set_solid(int i, int j, int k, bool v = true) { solid[index(i, j, k)] = v ? 1 : 0; }
    [[nodiscard]] Vec3 center(int i, int j, int k) const {
        return origin + resolution * Vec3(i + 0.5, j + 0.5, k + 0.5);
    }
    [[nodiscard]] std::size_t solid_count() const;
};

inline constexpr std::size_t kDefaultMaxCells = 512ULL * 512ULL * 512ULL;
inline constexpr double kDefaultApertureThreshold = 0.30;  // m

/// Cell-center voxelization of the settled pile. The grid sits on the ground
/// and has one empty cell of padding on the sides and top. Throws GridError
/// when the cell count would exceed `max_cells`.
VoxelGrid voxelize(const Pile& pile, double resolution, std::size_t max_cells = kDefaultMaxCells);

enum class Openness { Enclosed, Vented };
std::string_view to_string(Openness o);

struct VoidRegion {
    int id = 0;
    std::size_t voxels = 0;
    double volume = 0.0;  // m^3
    Aabb bounds;          // world space, cell faces
    Eigen::Vector3i seed = Eigen::Vector3i::Zero();
    Openness openness = Openness::Enclosed;
};

struct VoidAnalysis {
    std::vector<VoidRegion> regions;  // volume descending, ids from 1
    std::vector<int> labels;          // per cell: -1 solid, 0 exterior, else region id
    std::size_t exterior_cells = 0;
    std::size_t solid_cells = 0;
    std::size_t void_cells = 0;
};

/// Empty space the outside cannot reach through openings at least
/// `aperture` wide. A region that the plain (undilated) exterior fill
/// reaches is vented; one it never reaches is enclosed.
VoidAnalysis analyze_voids(const VoxelGrid& grid, double aperture = kDefaultApertureThreshold);

inline std::vector<VoidRegion> find_voids(const VoxelGrid& grid, double aperture = kDefaultApertureThreshold) {
    return analyze_voids(grid, aperture).regions;
}

}  // namespace rubble
