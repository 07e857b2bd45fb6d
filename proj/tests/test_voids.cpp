#include <gtest/gtest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "rubble/voids.hpp"

using namespace rubble;

namespace {

// 7^3 grid, shell occupying cells 1..5, cavity 2..4.
VoxelGrid shell_grid(bool hole) {
    VoxelGrid g(Vec3::Zero(), 1.0, Eigen::Vector3i(7, 7, 7));
    for (int k = 1; k <= 5; ++k)
        for (int j = 1; j <= 5; ++j)
            for (int i = 1; i <= 5; ++i) {
                const bool inner = i >= 2 && i <= 4 && j >= 2 && j <= 4 && k >= 2 && k <= 4;
                if (!inner) g.set_solid(i, j, k);
            }
    if (hole) g.set_solid(3, 3, 5, false);
    return g;
}

std::size_t count(const std::vector<VoidRegion>& regions, Openness o) {
    return static_cast<std::size_t>(
        std::count_if(regions.begin(), regions.end(), [&](const VoidRegion& r) { return r.openness == o; }));
}

}  // namespace

TEST(Voxelize, UnitBox) {
    const Pile pile = test::block_pile({{Vec3(1, 1, 1), Vec3(0.2, -0.3, 0.5)}});
    const VoxelGrid g = voxelize(pile, 0.25);
    EXPECT_NEAR(static_cast<double>(g.solid_count()), 64.0, 48.0);
    EXPECT_TRUE(g.grounded);
    EXPECT_DOUBLE_EQ(g.origin.z(), 0.0);
    // Border ring empty on the sides and top.
    for (int k = 0; k < g.dims.z(); ++k)
        for (int j = 0; j < g.dims.y(); ++j)
            for (int i = 0; i < g.dims.x(); ++i) {
                const bool border = i == 0 || j == 0 || i == g.dims.x() - 1 || j == g.dims.y() - 1 || k == g.dims.z() - 1;
                if (border) ASSERT_FALSE(g.is_solid(i, j, k));
            }
}

TEST(Voxelize, AlignedUnitBoxExact) {
    const Pile pile = test::block_pile({{Vec3(1, 1, 1), Vec3(0, 0, 0.5)}});
    EXPECT_EQ(voxelize(pile, 0.25).solid_count(), 64u);
}

TEST(Voxelize, EmptyPile) {
    Pile pile;
    pile.catalog = std::make_shared<const Catalog>(default_catalog());
    const VoxelGrid g = voxelize(pile, 0.1);
    EXPECT_EQ(g.solid_count(), 0u);
    EXPECT_TRUE(find_voids(g).empty());
}

TEST(Voxelize, VolumeMatchesShapes) {
    SimConfig cfg;
    cfg.objs_per_layer = 40;
    cfg.spawn_half_extent = Vec3(2, 2, 0.25);
    const Catalog catalog = default_catalog();
    Pile pile;
    pile.catalog = std::make_shared<const Catalog>(catalog);
    Rng rng(8);
    pile.instances = spawn_layer(pile, cfg, catalog, 0, rng);
    double analytic = 0.0;
    for (std::size_t i = 0; i < pile.instances.size(); ++i) analytic += pile.asset(i).volume;
    const double res = 0.05;
    const double measured = static_cast<double>(voxelize(pile, res).solid_count()) * res * res * res;
    EXPECT_NEAR(measured / analytic, 1.0, 0.10);
}

TEST(Voxelize, MemoryBudget) {
    const Pile pile = test::block_pile({{Vec3(4, 4, 4), Vec3(0, 0, 2)}});
    EXPECT_THROW(voxelize(pile, 0.01, 1000000), GridError);
}

TEST(Voids, SealedShell) {
    const auto regions = find_voids(shell_grid(false));
    ASSERT_EQ(regions.size(), 1u);
    EXPECT_EQ(regions[0].id, 1);
    EXPECT_EQ(regions[0].voxels, 27u);
    EXPECT_DOUBLE_EQ(regions[0].volume, 27.0);
    EXPECT_EQ(regions[0].openness, Openness::Enclosed);
    EXPECT_EQ(regions[0].bounds.lo, Vec3(2, 2, 2));
    EXPECT_EQ(regions[0].bounds.hi, Vec3(5, 5, 5));
}

TEST(Voids, PuncturedShell) {
    const VoxelGrid g = shell_grid(true);
    const auto vented = find_voids(g, 1.5);
    EXPECT_EQ(count(vented, Openness::Enclosed), 0u);
    EXPECT_EQ(count(vented, Openness::Vented), 1u);
    // An aperture below the cell size lets the exterior fill the cavity.
    EXPECT_TRUE(find_voids(g, 0.5).empty());
}

TEST(Voids, NoSolid) {
    VoxelGrid g(Vec3::Zero(), 0.1, Eigen::Vector3i(6, 5, 4));
    EXPECT_TRUE(find_voids(g).empty());
}

TEST(Voids, Partition) {
    for (bool hole : {false, true}) {
        const VoxelGrid g = shell_grid(hole);
        const VoidAnalysis a = analyze_voids(g, 1.5);
        EXPECT_EQ(a.exterior_cells + a.void_cells + a.solid_cells, g.size());
        std::size_t in_regions = 0;
        for (const auto& r : a.regions) in_regions += r.voxels;
        EXPECT_EQ(in_regions, a.void_cells);
        for (std::size_t c = 0; c < g.size(); ++c) EXPECT_EQ(a.labels[c] == -1, g.solid[c] != 0);
    }
}

TEST(Voids, SortedAndConnected) {
    // Two sealed cavities of different size side by side.
    VoxelGrid g(Vec3::Zero(), 1.0, Eigen::Vector3i(12, 7, 7));
    for (int k = 1; k <= 5; ++k)
        for (int j = 1; j <= 5; ++j)
            for (int i = 1; i <= 10; ++i) g.set_solid(i, j, k);
    for (int k = 2; k <= 4; ++k)
        for (int j = 2; j <= 4; ++j)
            for (int i = 2; i <= 4; ++i) g.set_solid(i, j, k, false);
    for (int k = 2; k <= 3; ++k)
        for (int j = 2; j <= 3; ++j)
            for (int i = 7; i <= 8; ++i) g.set_solid(i, j, k, false);
    const auto regions = find_voids(g);
    ASSERT_EQ(regions.size(), 2u);
    EXPECT_EQ(regions[0].voxels, 27u);
    EXPECT_EQ(regions[1].voxels, 8u);
    EXPECT_EQ(regions[0].id, 1);
    EXPECT_EQ(regions[1].id, 2);
}

TEST(Voids, MirrorInvariant) {
    const VoxelGrid g = shell_grid(true);
    VoxelGrid m = g;
    for (int k = 0; k < 7; ++k)
        for (int j = 0; j < 7; ++j)
            for (int i = 0; i < 7; ++i) m.set_solid(6 - i, 6 - j, k, g.is_solid(i, j, k));
    const auto a = find_voids(g, 1.5), b = find_voids(m, 1.5);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].voxels, b[i].voxels);
        EXPECT_EQ(a[i].openness, b[i].openness);
    }
}

TEST(Voids, HollowBoxPile) {
    const VoxelGrid sealed = voxelize(test::hollow_box(false), 0.1);
    const auto regions = find_voids(sealed);
    ASSERT_EQ(regions.size(), 1u);
    EXPECT_EQ(regions[0].openness, Openness::Enclosed);
    EXPECT_EQ(regions[0].voxels, 216u);
    EXPECT_NEAR(regions[0].volume, 0.216, 1e-9);

    const auto punctured = find_voids(voxelize(test::hollow_box(true), 0.1));
    EXPECT_EQ(count(punctured, Openness::Enclosed), 0u);
    EXPECT_EQ(count(punctured, Openness::Vented), 1u);
}

TEST(Voids, VolumeConvergesWithResolution) {
    const Pile pile = test::hollow_box(false);
    for (double res : {0.1, 0.05, 0.04, 0.025}) {
        const auto regions = find_voids(voxelize(pile, res), 0.3);
        ASSERT_EQ(regions.size(), 1u) << res;
        // Cavity surface 2.16 m^2; cell-center sampling errs by under one cell layer.
        EXPECT_NEAR(regions[0].volume, 0.216, 2.16 * res) << res;
    }
}

TEST(Voids, OpennessNames) {
    EXPECT_EQ(to_string(Openness::Enclosed), "enclosed");
    EXPECT_EQ(to_string(Openness::Vented), "vented");
}
