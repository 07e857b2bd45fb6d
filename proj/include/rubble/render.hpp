#pragma once

#include <cstdint>
#include <vector>

#include "rubble/bvh.hpp"
#include "rubble/camera.hpp"
#include "rubble/config.hpp"
#include "rubble/rng.hpp"

namespace rubble {

struct GlobalLight {
    LightType type = LightType::Directional;
    double intensity = 1.0;
    Vec3 rotation_deg = Vec3::Zero();  // applied as Rz * Ry * Rx to the -z axis
    Vec3 position = Vec3(0.0, 0.0, 10.0);
    double cone_deg = 30.0;  // spot half-angle

    /// Direction the light travels (unit).
    [[nodiscard]] Vec3 direction() const;
};

struct Headlamp {
    bool on = false;
    double intensity = 1.0;
};

struct LightingRig {
    GlobalLight global;
    Headlamp headlamp;
};

/// Rig from the config; when `fixed_light_rotation` is off the rotation is
/// drawn with azimuth uniform in [0, 360) and elevation uniform in [15, 90] degrees.
LightingRig global_light_from_config(const SimConfig& cfg, Rng& rng);

struct DustPlume {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
    double sigma_boost = 1.0;  // 1/m added inside the sphere
    double start = 0.0;        // s
    double duration = 3.0;     // s

    [[nodiscard]] bool active(double t) const { return t >= start && t < start + duration; }
};

struct FogField {
    double sigma_base = 0.0;       // 1/m
    double noise_amplitude = 0.0;  // 1/m
    double noise_scale = 2.0;      // m
    std::vector<DustPlume> plumes;

    /// Extinction at `p` and time `t`, excluding plumes.
    [[nodiscard]] double ambient_sigma(const Vec3& p, double t) const;
    [[nodiscard]] double plume_sigma(const Vec3& p, double t) const;
};

FogField fog_from_config(const SimConfig& cfg);

/// Plumes that start every `period` seconds over `duration` at random spots
/// on top of the pile bounds.
std::vector<DustPlume> periodic_plumes(const Aabb& pile_bounds, double duration, double period, Rng& rng);

inline constexpr double kAmbient = 0.02;
inline constexpr double kSpecularExponent = 32.0;
inline constexpr double kFogGray = 0.5;
inline constexpr int kPlumeSamples = 8;
inline constexpr double kSkyDistance = 100.0;  // m of fog in front of escaped rays

struct Frame {
    int width = kImageSize;
    int height = kImageSize;
    std::vector<std::uint8_t> rgb;  // row-major, 3 per pixel
    std::vector<double> depth;      // planar depth in m, 0 = no hit
    CameraState pose;
    double timestamp = 0.0;
    long frame_index = 0;

    // Filled when rendering in debug mode.
    std::vector<float> radiance;   // 3 per pixel, before clamping and quantization
    std::vector<double> hit_point;  // 3 per pixel, world space (0 for misses)
};

struct RenderOptions {
    bool debug = false;
};

/// Pinhole ray for pixel (u, v) through its center, in the camera frame
/// with unit z component.
Vec3 pixel_ray(const Intrinsics& k, double u, double v);

/// Radiance of a surface point seen along `view_dir` (unit, from camera).
Vec3 shade(const RayHit& hit, const Vec3& view_dir, double range, const LightingRig& rig);

Frame render_frame(const Scene& scene, const CameraState& camera, const LightingRig& rig, const FogField& fog,
                   double t, const RenderOptions& options = {});

}  // namespace rubble
