#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "fixtures.hpp"
#include "rubble/export.hpp"

using namespace rubble;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    return p;
}

std::size_t render_triangle_count(const Pile& pile) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < pile.instances.size(); ++i) n += pile.asset(i).render_mesh->triangles().size();
    return n;
}

Trajectory short_track(int size, int samples) {
    std::vector<Waypoint> w = {{std::nullopt, Vec3(-3, 0, 1), Vec3(0, 0, 0.3)}, {std::nullopt, Vec3(-2, 0, 1), Vec3(0, 0, 0.3)}};
    Intrinsics k;
    k.width = k.height = size;
    return run_script(w, samples - 1.0, 1.0, k);
}

}  // namespace

TEST(Stl, UnitBox) {
    const Pile pile = test::block_pile({{Vec3(1, 1, 1), Vec3(2, 3, 0.5)}});
    const fs::path path = scratch("rubble_box.stl");
    export_stl(pile, path);
    EXPECT_EQ(fs::file_size(path), 84u + 50u * 12u);
    const StlMesh mesh = read_stl(path);
    ASSERT_EQ(mesh.triangles.size(), 12u);
    Aabb box;
    for (const auto& t : mesh.triangles)
        for (const auto& v : t) box.grow(v);
    EXPECT_NEAR((box.lo - Vec3(1.5, 2.5, 0)).norm(), 0.0, 1e-6);
    EXPECT_NEAR((box.hi - Vec3(2.5, 3.5, 1)).norm(), 0.0, 1e-6);
    EXPECT_NE(mesh.header.find(hash_hex(pile.config_hash)), std::string::npos);
}

TEST(Stl, TriangleCountOfManyBoxes) {
    std::vector<test::Block> blocks;
    for (int i = 0; i < 17; ++i) blocks.push_back({Vec3(0.5, 0.4, 0.3), Vec3(i * 1.0, 0, 0.15)});
    const Pile pile = test::block_pile(blocks);
    const fs::path path = scratch("rubble_boxes.stl");
    export_stl(pile, path);
    EXPECT_EQ(read_stl(path).triangles.size(), 12u * 17u);
}

TEST(Stl, HeaderCarriesConfigHash) {
    SimConfig cfg;
    cfg.num_layers = 1;
    cfg.objs_per_layer = 12;
    const Pile pile = build_pile(cfg, default_catalog());
    const fs::path path = scratch("rubble_pile.stl");
    export_stl(pile, path);
    const StlMesh mesh = read_stl(path);
    EXPECT_NE(mesh.header.find("config_hash=" + hash_hex(config_hash(cfg))), std::string::npos);
    EXPECT_EQ(mesh.triangles.size(), render_triangle_count(pile));
}

TEST(Stl, RevoxelizedMatchesPile) {
    SimConfig cfg;
    cfg.num_layers = 2;
    cfg.objs_per_layer = 25;
    cfg.spawn_half_extent = Vec3(2.5, 2.5, 0.25);
    const Pile pile = build_pile(cfg, default_catalog());
    const fs::path path = scratch("rubble_revox.stl");
    export_stl(pile, path);
    const VoxelGrid direct = voxelize(pile, 0.05);
    VoxelGrid again(direct.origin, direct.resolution, direct.dims, direct.grounded);
    voxelize_mesh(read_stl(path).triangles, again);
    const double a = static_cast<double>(direct.solid_count()), b = static_cast<double>(again.solid_count());
    ASSERT_GT(a, 0.0);
    EXPECT_LT(std::abs(a - b) / a, 0.01);
}

TEST(Stl, IoFailure) {
    const Pile pile = test::block_pile({{Vec3(1, 1, 1), Vec3(0, 0, 0.5)}});
    EXPECT_THROW(export_stl(pile, "/nonexistent-dir/x.stl"), IoError);
    EXPECT_THROW(read_stl("/nonexistent-dir/x.stl"), IoError);
}

TEST(Depth, MillimeterConversion) {
    EXPECT_EQ(depth_to_mm(1.234f), 1234);
    EXPECT_EQ(depth_to_mm(0.0f), 0);
    EXPECT_EQ(depth_to_mm(65.535f), 65535);
    EXPECT_EQ(depth_to_mm(80.0f), 65535);
    EXPECT_EQ(depth_to_mm(0.0004f), 0);
}

TEST(Depth, PngRoundTrip) {
    Rng rng(1);
    const int w = 37, h = 23;
    std::vector<float> depth(w * h);
    std::vector<std::uint16_t> mm(w * h);
    for (std::size_t i = 0; i < depth.size(); ++i) {
        depth[i] = i % 7 == 0 ? 0.0f : static_cast<float>(rng.uniform(0.1, 30.0));
        mm[i] = depth_to_mm(depth[i]);
    }
    const fs::path path = scratch("rubble_depth.png");
    write_png_gray16(path, w, h, mm);
    int rw = 0, rh = 0;
    const auto back = read_png_gray16(path, rw, rh);
    ASSERT_EQ(rw, w);
    ASSERT_EQ(rh, h);
    for (std::size_t i = 0; i < depth.size(); ++i) EXPECT_LE(std::abs(back[i] / 1000.0 - depth[i]), 0.0005);
}

TEST(Rgb, PngRoundTrip) {
    std::vector<std::uint8_t> rgb(3 * 5 * 4);
    for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<std::uint8_t>(i * 13);
    const fs::path path = scratch("rubble_rgb.png");
    write_png_rgb8(path, 5, 4, rgb);
    int w = 0, h = 0;
    EXPECT_EQ(read_png_rgb8(path, w, h), rgb);
}

TEST(Groundtruth, RowFormat) {
    const Quat q = axis_angle(Vec3(1, 2, 3).normalized(), 0.4);
    const std::string row = groundtruth_row(1.0 / 30.0, Vec3(1, -2.5, 0.125), q);
    EXPECT_EQ(row.rfind("0.033333333 1.000000000 -2.500000000 0.125000000 ", 0), 0u);
    std::istringstream in(row);
    double v[8];
    for (double& x : v) in >> x;
    EXPECT_NEAR(std::sqrt(v[4] * v[4] + v[5] * v[5] + v[6] * v[6] + v[7] * v[7]), 1.0, 1e-6);
    EXPECT_NEAR(v[7], q.w(), 1e-9);
}

TEST(Dataset, IndexGap) {
    const Pile pile = test::block_pile({{Vec3(1, 1, 1), Vec3(0, 0, 0.5)}});
    DatasetManifest m;
    m.root = scratch("rubble_gap");
    DatasetWriter writer(pile, m);
    Frame f;
    f.width = f.height = 2;
    f.rgb.assign(12, 0);
    f.depth.assign(4, 1.0f);
    writer.write(f);
    f.frame_index = 2;
    EXPECT_THROW(writer.write(f), IoError);
}

TEST(Dataset, Layout) {
    const Pile pile = test::hollow_box(true);
    SimConfig cfg;
    cfg.seed = 77;
    const Trajectory traj = short_track(32, 7);
    ASSERT_EQ(traj.samples.size(), 7u);
    const fs::path root = scratch("rubble_dataset");
    const DatasetManifest m = write_dataset(pile, cfg, traj, LightingRig{}, FogField{}, root, 2);
    EXPECT_EQ(m.frame_count, 7);
    for (int i = 0; i < 7; ++i) {
        EXPECT_TRUE(fs::exists(root / "rgb" / frame_name(i)));
        EXPECT_TRUE(fs::exists(root / "depth" / frame_name(i)));
    }
    EXPECT_FALSE(fs::exists(root / "rgb" / frame_name(7)));
    EXPECT_TRUE(fs::exists(root / "pile.stl"));
    std::ifstream gt(root / "groundtruth.txt");
    std::string line;
    int rows = 0;
    while (std::getline(gt, line)) {
        if (line.empty() || line[0] == '#') continue;
        EXPECT_EQ(line.substr(0, 11), groundtruth_row(traj.samples[rows].t, Vec3::Zero(), Quat::Identity()).substr(0, 11));
        ++rows;
    }
    EXPECT_EQ(rows, 7);
    std::map<std::string, std::string> kv;
    for (const auto& [k, v] : read_manifest(root / "manifest.txt")) kv[k] = v;
    EXPECT_EQ(kv["frames"], "7");
    EXPECT_EQ(kv["seed"], "77");
    EXPECT_EQ(kv["config_hash"], hash_hex(config_hash(cfg)));
    EXPECT_EQ(kv["rgb"], "rgb/%06d.png");
    EXPECT_EQ(parse_config_text([&] {
                  std::string text;
                  for (const auto& [k, v] : kv)
                      if (k.rfind("config.", 0) == 0) text += k.substr(7) + "=" + v + "\n";
                  return text;
              }()),
              cfg);
}

TEST(Dataset, DepthMatchesRender) {
    const Pile pile = test::hollow_box(false);
    const Trajectory traj = short_track(24, 2);
    const fs::path root = scratch("rubble_dataset_depth");
    write_dataset(pile, SimConfig{}, traj, LightingRig{}, FogField{}, root);
    const Frame f = render_frame(pile.scene, traj.samples[1].state, LightingRig{}, FogField{}, traj.samples[1].t);
    int w = 0, h = 0;
    const auto mm = read_png_gray16(root / "depth" / frame_name(1), w, h);
    for (std::size_t i = 0; i < mm.size(); ++i) EXPECT_LE(std::abs(mm[i] / 1000.0 - f.depth[i]), 0.0005);
    EXPECT_EQ(read_png_rgb8(root / "rgb" / frame_name(1), w, h), f.rgb);
}

TEST(Queue, ProducerBlocksWhenFull) {
    BoundedQueue<int> q(2);
    q.push(1);
    q.push(2);
    std::atomic<bool> pushed{false};
    std::thread producer([&] {
        q.push(3);
        pushed = true;
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    EXPECT_FALSE(pushed);
    EXPECT_EQ(q.size(), 2u);
    EXPECT_EQ(q.pop(), 1);
    producer.join();
    EXPECT_TRUE(pushed);
    EXPECT_EQ(q.pop(), 2);
    EXPECT_EQ(q.pop(), 3);
    q.close();
    EXPECT_FALSE(q.pop().has_value());
}
