// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rubble/bench.hpp"
#include "rubble/export.hpp"
#include "rubble/render.hpp"
#include "rubble/voids.hpp"

using namespace rubble;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

Outcome determinism() {
    Outcome o;
    const auto t0 = Clock::now();
    const Catalog catalog = default_catalog();
    for (std::uint64_t seed : {1234ULL, 1ULL, 2ULL, 3ULL, 4ULL}) {
        SimConfig cfg;
        cfg.seed = seed;
        const Pile a = build_pile(cfg, catalog), b = build_pile(cfg, catalog);
        bool same = a.instances.size() == b.instances.size();
        for (std::size_t i = 0; same && i < a.instances.size(); ++i) {
            const auto &x = a.instances[i], &y = b.instances[i];
            same = x.class_index == y.class_index && x.position == y.position && x.orientation.coeffs() == y.orientation.coeffs();
        }
        o.check(same, "seed " + std::to_string(seed) + " differs between builds");
    }
    const double t = seconds_since(t0);
    o.check(t < 300.0, "runtime");
    o.note(fmt("5 seeds x 2 builds of 5x100 in %.1f s", t));
    return o;
}

Outcome full_scale() {
    Outcome o;
    SimConfig cfg;
    cfg.num_layers = 15;
    cfg.objs_per_layer = 250;
    cfg.spawn_half_extent = Vec3(5, 5, 0.5);
    const auto t0 = Clock::now();
    const Pile pile = build_pile(cfg, default_catalog());
    const double t = seconds_since(t0);
    const PileCheck c = check_pile(pile);
    o.check(pile.instances.size() == 3750, "instance count");
    o.check(t <= 60.0, "build time");
    o.check(c.all_asleep, "all asleep");
    o.check(c.floaters == 0, "floaters");
    o.check(c.max_penetration <= 0.02, "penetration");
    o.note(fmt("3750 bodies in %.1f s, max penetration %.4f m, max height %.2f m", t, c.max_penetration, pile.max_height()));
    return o;
}

Outcome height_trend() {
    Outcome o;
    const auto t0 = Clock::now();
    const Catalog catalog = default_catalog();
    std::vector<double> medians;
    for (int layers : {3, 6, 10}) {
        std::vector<double> heights;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            SimConfig cfg;
            cfg.seed = seed;
            cfg.num_layers = layers;
            heights.push_back(build_pile(cfg, catalog).max_height());
        }
        std::sort(heights.begin(), heights.end());
        medians.push_back(0.5 * (heights[9] + heights[10]));
    }
    o.check(medians[0] < medians[1] && medians[1] < medians[2], "median heights not strictly increasing");
    o.note(fmt("median max height 3/6/10 layers: %.3f / %.3f / ", medians[0], medians[1]) + fmt("%.3f m", medians[2]) +
           fmt(" (%.0f s)", seconds_since(t0)));
    return o;
}

Pile wall(double d) { return test::block_pile({{Vec3(0.1, 20, 20), Vec3(d + 0.05, 0, 3)}}); }

CameraState facing_x(int size) {
    CameraState c;
    c.position = Vec3(0, 0, 3);
    c.orientation = look_at(c.position, Vec3(1, 0, 3));
    c.intrinsics.width = c.intrinsics.height = size;
    return c;
}

std::optional<double> brute_force_distance(const Scene& s, const Vec3& o, const Vec3& d) {
    std::optional<double> best;
    for (const auto& tri : s.triangles()) {
        if (auto t = intersect_triangle(tri, o, d)) best = best ? std::min(*best, *t) : *t;
    }
    if (s.has_ground() && d.z() < 0.0) {
        const double t = -o.z() / d.z();
        if (t > 0.0) best = best ? std::min(*best, t) : t;
    }
    return best;
}

Outcome radiometry() {
    Outcome o;
    const auto t0 = Clock::now();

    // Beer-Lambert through homogeneous fog onto a lit wall.
    {
        const double sigma = 0.5, d = 4.0;
        const Pile pile = wall(d);
        LightingRig rig;
        rig.global.intensity = 0.5;
        rig.global.rotation_deg = Vec3(0, -90, 0);
        FogField fog;
        fog.sigma_base = sigma;
        const Frame f = render_frame(pile.scene, facing_x(kImageSize), rig, fog, 0.0);
        const std::size_t px = static_cast<std::size_t>(kImageSize / 2) * kImageSize + kImageSize / 2;
        const double T = std::exp(-sigma * d);
        const Vec3 albedo = pile.catalog->at(0).albedo;
        double worst = 0.0;
        for (int ch = 0; ch < 3; ++ch) {
            const double surface = albedo[ch] * (kAmbient + 0.5) + 0.2 * 0.5;
            worst = std::max(worst, std::abs(f.rgb[3 * px + ch] - 255.0 * (T * surface + (1.0 - T) * kFogGray)));
        }
        o.check(worst <= 1.0, "Beer-Lambert center pixel");
        o.note(fmt("Beer-Lambert error %.2f steps", worst));
    }

    // Headlamp falloff, lamp contribution only.
    {
        LightingRig off;
        off.global.intensity = 0.0;
        LightingRig lamp = off;
        lamp.headlamp = {true, 1.0};
        auto lamp_radiance = [&](double d) {
            const Pile pile = wall(d);
            const Frame a = render_frame(pile.scene, facing_x(64), lamp, FogField{}, 0.0, {true});
            const Frame b = render_frame(pile.scene, facing_x(64), off, FogField{}, 0.0, {true});
            const std::size_t i = 3 * (32 * 64 + 32);
            return static_cast<double>(a.radiance[i]) - b.radiance[i];
        };
        const double ratio = lamp_radiance(1.0) / lamp_radiance(2.0);
        o.check(std::abs(ratio - 4.0) <= 0.2, "headlamp ratio");
        o.note(fmt("headlamp 1 m / 2 m ratio %.4f", ratio));
    }

    SimConfig cfg;
    cfg.num_layers = 3;
    cfg.objs_per_layer = 60;
    cfg.spawn_half_extent = Vec3(3, 3, 0.25);
    const Pile pile = build_pile(cfg, default_catalog());
    Rng rng(99);

    // Depth registration on random pixels.
    {
        CameraState cam;
        cam.position = Vec3(-6, -4, 2.5);
        cam.orientation = look_at(cam.position, Vec3(0, 0, 0.5));
        const Frame f = render_frame(pile.scene, cam, LightingRig{}, FogField{}, 0.0, {true});
        const Mat3 r = cam.orientation.toRotationMatrix();
        double worst = 0.0;
        int sampled = 0;
        while (sampled < 10000) {
            const int u = static_cast<int>(rng.uniform() * f.width), v = static_cast<int>(rng.uniform() * f.height);
            const std::size_t p = static_cast<std::size_t>(v) * f.width + u;
            if (f.depth[p] == 0.0) continue;
            const Vec3 x = cam.position + r * (pixel_ray(cam.intrinsics, u + 0.5, v + 0.5) * f.depth[p]);
            const Vec3 h(f.hit_point[3 * p], f.hit_point[3 * p + 1], f.hit_point[3 * p + 2]);
            worst = std::max(worst, (x - h).norm());
            ++sampled;
        }
        o.check(worst < 1e-4, "depth registration");
        o.note(fmt("registration max error %.2e m", worst));
    }

    // Accelerated ray casts against brute force.
    {
        int mismatches = 0, hits = 0;
        for (int i = 0; i < 10000; ++i) {
            const Vec3 origin(rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(0.05, 3));
            const Vec3 dir = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
            const auto a = pile.scene.ray_cast(origin, dir);
            const auto b = brute_force_distance(pile.scene, origin, dir);
            if (a.has_value() != b.has_value() || (a && std::abs(a->distance - *b) > 1e-6)) ++mismatches;
            hits += a ? 1 : 0;
        }
        o.check(mismatches == 0, std::to_string(mismatches) + " BVH mismatches");
        o.note("10000 rays, " + std::to_string(hits) + " hits, " + std::to_string(mismatches) + " mismatches");
    }
    const double t = seconds_since(t0);
    o.check(t < 120.0, "runtime");
    o.note(fmt("%.1f s", t));
    return o;
}

Outcome voids() {
    Outcome o;
    const double res = SimConfig{}.voxel_resolution;
    const auto sealed = find_voids(voxelize(test::hollow_box(false), res));
    const std::size_t enclosed = std::count_if(sealed.begin(), sealed.end(), [](auto& r) { return r.openness == Openness::Enclosed; });
    o.check(sealed.size() == 1 && enclosed == 1, "sealed fixture region count");
    if (!sealed.empty()) {
        // Cavity 0.6 x 0.6 x 0.6 m, surface 2.16 m^2.
        o.check(std::abs(sealed[0].volume - 0.216) <= 2.16 * res, "sealed volume");
        o.note(fmt("sealed: 1 enclosed region, %.4f m^3 (analytic 0.2160)", sealed[0].volume));
    }
    const auto punctured = find_voids(voxelize(test::hollow_box(true), res));
    std::size_t pe = 0, pv = 0;
    for (const auto& r : punctured) (r.openness == Openness::Enclosed ? pe : pv)++;
    o.check(pe == 0 && pv == 1, "punctured fixture");
    o.note("punctured: " + std::to_string(pe) + " enclosed, " + std::to_string(pv) + " vented");
    return o;
}

std::string estimate_file(const EstimatedTrajectory& est) {
    std::ostringstream out;
    out.precision(17);
    for (const auto& im : est.images) {
        if (!im.registered) {
            out << im.name << " -1\n";
            continue;
        }
        const Quat& q = im.orientation;
        out << im.name << " " << im.model_id << " " << im.position.x() << " " << im.position.y() << " "
            << im.position.z() << " " << q.x() << " " << q.y() << " " << q.z() << " " << q.w() << "\n";
    }
    for (const auto& [id, n] : est.points_per_model) out << "points " << id << " " << n << "\n";
    return out.str();
}

bool on_path(const std::string& tool) {
    const char* path = std::getenv("PATH");
    if (!path) return false;
    std::istringstream dirs(path);
    for (std::string d; std::getline(dirs, d, ':');)
        if (!d.empty() && fs::exists(fs::path(d) / tool)) return true;
    return false;
}

Outcome bench() {
    Outcome o;
    Rng rng(2024);
    int disagreements = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto c = test::random_case(rng, 20 + static_cast<int>(rng.uniform() * 180));
        const BenchReport rep = compute_report(c.est, c.gt);
        const auto on = test::oracle_on_track(c.gt, c.est, kDefaultOnTrackThreshold);
        std::vector<int> model;
        for (const auto& im : c.est.images) model.push_back(im.registered ? im.model_id : -1);
        if (rep.on_track != on || rep.track_segments != test::brute_force_segments(on, model)) ++disagreements;
    }
    o.check(disagreements == 0, std::to_string(disagreements) + " oracle disagreements");
    o.note("1000 random cases, " + std::to_string(disagreements) + " disagreements");

    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Vec3> gt, est;
        for (const auto& r : test::helix_groundtruth(40)) gt.push_back(r.position);
        Similarity s;
        s.rotation = test::random_rotation(rng);
        s.scale = rng.uniform(0.1, 10.0);
        s.translation = Vec3(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20));
        for (const auto& p : gt) est.push_back(s.apply(p));
        const Alignment a = align_model(est, gt);
        worst = std::max({worst, std::abs(a.transform.scale * s.scale - 1.0),
                          (a.transform.rotation * s.rotation - Mat3::Identity()).norm()});
        for (std::size_t i = 0; i < gt.size(); ++i) worst = std::max(worst, (a.transform.apply(est[i]) - gt[i]).norm());
    }
    o.check(worst <= 1e-9, "similarity recovery");
    o.note(fmt("Sim(3) recovery max error %.1e", worst));

    const auto ext = test::exterior_row_case();
    const fs::path file = fs::temp_directory_path() / "rubble_exterior_estimate.txt";
    std::ofstream(file) << estimate_file(ext.est);
    const std::string row = compute_report(load_estimate(file), ext.gt).table_row();
    o.check(row == "126 1 92.6 79885", "Exterior row printed as '" + row + "'");
    o.note("Exterior row '" + row + "'");
    o.note(on_path("colmap") ? "colmap found but the SfM ordering check is not wired into this suite"
                             : "SfM ordering check not run (colmap not on PATH)");
    return o;
}

Outcome dataset() {
    Outcome o;
    SimConfig cfg;
    cfg.seed = 1234;
    const Pile pile = build_pile(cfg, default_catalog());
    const Trajectory traj =
        run_script({{std::nullopt, Vec3(-8, 0, 2), Vec3(0, 0, 0.5)}, {std::nullopt, Vec3(-6.5, 0, 2), Vec3(0, 0, 0.5)}}, 30.0,
                   0.5);
    const fs::path root = fs::temp_directory_path() / "rubble_acceptance_dataset";
    fs::remove_all(root);
    const auto t0 = Clock::now();
    Rng light_rng(cfg.seed);
    const LightingRig rig = global_light_from_config(cfg, light_rng);
    const FogField fog = fog_from_config(cfg);
    write_dataset(pile, cfg, traj, rig, fog, root);
    const double t = seconds_since(t0);

    auto count_files = [](const fs::path& dir) {
        std::size_t n = 0;
        for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ".png" ? 1 : 0;
        return n;
    };
    std::size_t rows = 0;
    {
        std::ifstream gt(root / "groundtruth.txt");
        for (std::string line; std::getline(gt, line);) rows += !line.empty() && line[0] != '#';
    }
    const std::size_t rgb = count_files(root / "rgb"), depth = count_files(root / "depth");
    o.check(traj.samples.size() == 91 && rgb == 91 && depth == 91 && rows == 91, "file counts");
    o.note("rgb " + std::to_string(rgb) + ", depth " + std::to_string(depth) + ", pose rows " + std::to_string(rows));

    double worst = 0.0;
    for (long i : {0L, 45L, 90L}) {
        const auto& s = traj.samples[static_cast<std::size_t>(i)];
        const Frame f = render_frame(pile.scene, s.state, rig, fog, s.t);
        int w = 0, h = 0;
        const auto mm = read_png_gray16(root / "depth" / frame_name(i), w, h);
        for (std::size_t p = 0; p < mm.size(); ++p) {
            if (f.depth[p] > 65.5) continue;
            worst = std::max(worst, std::abs(mm[p] / 1000.0 - f.depth[p]));
        }
    }
    o.check(worst <= 0.0005 + 1e-9, "depth round trip");
    o.note(fmt("depth round-trip max error %.2f mm", worst * 1000.0));

    std::size_t expected = 0;
    for (std::size_t i = 0; i < pile.instances.size(); ++i) expected += pile.asset(i).render_mesh->triangles().size();
    const std::size_t got = read_stl(root / "pile.stl").triangles.size();
    o.check(got == expected, "STL triangle count");
    o.note("STL " + std::to_string(got) + " / " + std::to_string(expected) + " triangles");
    o.note(fmt("91 frames at %.0fx%.0f in %.1f s", kImageSize, kImageSize, t));
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::string> only(argv + 1, argv + argc);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"determinism", determinism}, {"full-scale-pile", full_scale}, {"height-trend", height_trend},
        {"radiometry", radiometry},   {"void-oracle", voids},            {"bench-oracle", bench},
        {"dataset-contract", dataset},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
