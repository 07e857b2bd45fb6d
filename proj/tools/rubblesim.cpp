// rubblesim: generate, analyze, record, score and stream rubble piles.

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "rubble/assets.hpp"
#include "rubble/bench.hpp"
#include "rubble/camera.hpp"
#include "rubble/config.hpp"
#include "rubble/deposition.hpp"
#include "rubble/export.hpp"
#include "rubble/render.hpp"
#include "rubble/server.hpp"
#include "rubble/voids.hpp"

using namespace rubble;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

SimConfig config_from(const CLI::App& sub) { return parse_config(sub.remaining()); }

std::shared_ptr<const Catalog> catalog_from(const std::string& dir) {
    return std::make_shared<const Catalog>(dir.empty() ? default_catalog() : load_catalog(dir));
}

Pile build(const SimConfig& cfg, const Catalog& catalog, bool quiet) {
    const auto start = std::chrono::steady_clock::now();
    Pile pile = build_pile(cfg, catalog, {}, [&](const BuildProgress& p) {
        if (!quiet) std::fprintf(stderr, "layer %d  step %ld\n", p.layer, p.steps);
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!quiet) std::fprintf(stderr, "built %zu bodies in %.2f s\n", pile.instances.size(), secs);
    return pile;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Procedural rubble piles: generation, void analysis, rendering and SfM scoring.\n"
                 "Pile, lighting and effects flags (--numlayers, --seed, ...) are accepted by\n"
                 "generate, voids, record, render and serve; `rubblesim flags` lists them."};
    app.require_subcommand(1);
    std::string catalog_dir;
    app.add_option("--catalog", catalog_dir, "asset catalog directory (default: bundled)");
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "no progress output");

    auto* flags = app.add_subcommand("flags", "list configuration flags");

    auto* gen = app.add_subcommand("generate", "build a pile and export it as STL");
    gen->allow_extras();
    std::string stl_out = "pile.stl";
    gen->add_option("-o,--out", stl_out, "STL path");

    auto* voids = app.add_subcommand("voids", "build a pile and report its void regions");
    voids->allow_extras();
    double aperture = kDefaultApertureThreshold;
    voids->add_option("--aperture", aperture, "minimum opening width that vents a void (m)");

    auto* rec = app.add_subcommand("record", "render a scripted trajectory into a dataset");
    rec->allow_extras();
    std::string waypoints_path, dataset_out;
    double rate = 30.0, speed = 0.5;
    rec->add_option("-w,--waypoints", waypoints_path, "waypoint file")->required();
    rec->add_option("-o,--out", dataset_out, "dataset directory")->required();
    rec->add_option("--rate", rate, "frame rate (Hz)");
    rec->add_option("--speed", speed, "travel speed for untimed waypoints (m/s)");

    auto* view = app.add_subcommand("render", "render one view of a pile");
    view->allow_extras();
    std::vector<double> eye = {-8, 0, 2}, target = {0, 0, 0.5};
    int size = kImageSize;
    double view_time = 0.0;
    std::string rgb_out = "frame.png", depth_out, dump_out;
    view->add_option("--eye", eye, "camera position x y z")->expected(3);
    view->add_option("--at", target, "look-at point x y z")->expected(3);
    view->add_option("--size", size, "image width and height (px)");
    view->add_option("--time", view_time, "simulation time for fog and plumes (s)");
    view->add_option("-o,--out", rgb_out, "RGB PNG path");
    view->add_option("--depth", depth_out, "16-bit depth PNG path (mm)");
    view->add_option("--debug-dump", dump_out, "raw float32 radiance, row-major RGB, before clamping");

    auto* bench = app.add_subcommand("bench", "score an SfM estimate against a dataset");
    std::string dataset_dir, estimate_path;
    double threshold = kDefaultOnTrackThreshold;
    bench->add_option("--dataset", dataset_dir, "dataset directory")->required();
    bench->add_option("--estimate", estimate_path, "estimate file or COLMAP model directory")->required();
    bench->add_option("--ontrack-threshold", threshold, "on-track distance (m)");

    auto* serve = app.add_subcommand("serve", "stream a live session over websocket");
    serve->allow_extras();
    ServerOptions server;
    serve->add_option("--port", server.port, "TCP port");
    serve->add_option("--rate", server.rate, "frame rate (Hz)");
    serve->add_option("--address", server.address, "bind address");
    serve->add_option("--token", server.token, "required ?token= value");

    for (auto* sub : {gen, voids, rec, view, serve}) sub->add_flag("-q,--quiet", quiet, "no progress output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (flags->parsed()) {
            std::cout << config_help();
            return 0;
        }
        if (bench->parsed()) {
            const auto gt = load_groundtruth(std::filesystem::path(dataset_dir) / "groundtruth.txt");
            const auto report = compute_report(load_estimate(estimate_path), gt, threshold);
            std::cout << report.table_row() << "\n" << report.key_values();
            return 0;
        }

        auto catalog = catalog_from(catalog_dir);
        if (gen->parsed()) {
            const SimConfig cfg = config_from(*gen);
            const Pile pile = build(cfg, *catalog, quiet);
            export_stl(pile, stl_out);
            const PileCheck check = check_pile(pile);
            std::printf("bodies=%zu\nmax_height=%.4f\nsettle_steps=%ld\nconfig_hash=%s\n", pile.instances.size(),
                        pile.max_height(), pile.settle_steps, hash_hex(pile.config_hash).c_str());
            std::printf("all_asleep=%d\nfloaters=%zu\nmax_penetration=%.4f\nstl=%s\n", check.all_asleep ? 1 : 0,
                        check.floaters, check.max_penetration, stl_out.c_str());
            return 0;
        }
        if (voids->parsed()) {
            const SimConfig cfg = config_from(*voids);
            const Pile pile = build(cfg, *catalog, quiet);
            const VoxelGrid grid = voxelize(pile, cfg.voxel_resolution);
            for (const auto& r : find_voids(grid, aperture)) {
                std::printf("%d %.6f %s %.3f %.3f %.3f %.3f %.3f %.3f\n", r.id, r.volume,
                            std::string(to_string(r.openness)).c_str(), r.bounds.lo.x(), r.bounds.lo.y(),
                            r.bounds.lo.z(), r.bounds.hi.x(), r.bounds.hi.y(), r.bounds.hi.z());
            }
            return 0;
        }
        if (rec->parsed()) {
            const SimConfig cfg = config_from(*rec);
            const auto waypoints = load_waypoints(waypoints_path);
            const Pile pile = build(cfg, *catalog, quiet);
            const Trajectory traj = run_script(waypoints, rate, speed);
            Rng rng(cfg.seed ^ 0x4C49474854ULL);
            const LightingRig rig = global_light_from_config(cfg, rng);
            const auto start = std::chrono::steady_clock::now();
            const auto manifest = write_dataset(pile, cfg, traj, rig, fog_from_config(cfg), dataset_out);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (!quiet) std::fprintf(stderr, "rendered %ld frames in %.1f s\n", manifest.frame_count, secs);
            std::printf("frames=%ld\nrate_hz=%g\ndataset=%s\n", manifest.frame_count, manifest.rate,
                        dataset_out.c_str());
            return 0;
        }
        if (view->parsed()) {
            const SimConfig cfg = config_from(*view);
            const Pile pile = build(cfg, *catalog, quiet);
            CameraState cam;
            cam.position = Vec3(eye[0], eye[1], eye[2]);
            cam.orientation = look_at(cam.position, Vec3(target[0], target[1], target[2]));
            cam.intrinsics.width = cam.intrinsics.height = size;
            Rng rng(cfg.seed ^ 0x4C49474854ULL);
            const LightingRig rig = global_light_from_config(cfg, rng);
            const Frame f = render_frame(pile.scene, cam, rig, fog_from_config(cfg), view_time, {!dump_out.empty()});
            write_png_rgb8(rgb_out, f.width, f.height, f.rgb);
            if (!depth_out.empty()) {
                std::vector<std::uint16_t> mm(f.depth.size());
                std::transform(f.depth.begin(), f.depth.end(), mm.begin(), depth_to_mm);
                write_png_gray16(depth_out, f.width, f.height, mm);
            }
            if (!dump_out.empty()) {
                std::ofstream out(dump_out, std::ios::binary);
                out.write(reinterpret_cast<const char*>(f.radiance.data()),
                          static_cast<std::streamsize>(f.radiance.size() * sizeof(float)));
                if (!out) throw IoError("cannot write " + dump_out);
            }
            std::printf("width=%d\nheight=%d\nrgb=%s\n", f.width, f.height, rgb_out.c_str());
            return 0;
        }
        if (serve->parsed()) {
            const SimConfig cfg = config_from(*serve);
            auto pile = std::make_shared<const Pile>(build(cfg, *catalog, quiet));
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            run_server(server, cfg, catalog, pile, g_stop, [&](unsigned short port) {
                std::fprintf(stderr, "listening on ws://%s:%u/\n", server.address.c_str(), port);
            });
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "rubblesim: %s\n", e.what());
        return 1;
    }
    return 0;
}
