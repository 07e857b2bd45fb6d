#include "rubble/render.hpp"

#include <cmath>

#include "rubble/noise.hpp"

namespace rubble {

Vec3 GlobalLight::direction() const {
    const Vec3 r = rotation_deg.unaryExpr([](double d) { return deg_to_rad(d); });
    const Quat q = axis_angle(Vec3::UnitZ(), r.z()) * axis_angle(Vec3::UnitY(), r.y()) * axis_angle(Vec3::UnitX(), r.x());
    return (q * Vec3(0.0, 0.0, -1.0)).normalized();
}

LightingRig global_light_from_config(const SimConfig& cfg, Rng& rng) {
    LightingRig rig;
    rig.global.type = cfg.light_type;
    rig.global.intensity = cfg.light_intensity;
    rig.global.position = cfg.light_position;
    rig.headlamp.on = cfg.headlamp_on;
    rig.headlamp.intensity = cfg.headlamp_intensity;
    if (cfg.fixed_light_rotation) {
        rig.global.rotation_deg = cfg.light_rotation_deg;
    } else {
        const double azimuth = rng.uniform(0.0, 360.0);
        const double elevation = rng.uniform(15.0, 90.0);
        rig.global.rotation_deg = Vec3(90.0 - elevation, 0.0, azimuth);
    }
    return rig;
}

double FogField::ambient_sigma(const Vec3& p, double t) const {
    if (noise_amplitude <= 0.0) return sigma_base;
    const Vec3 drift(0.37 * t, 0.21 * t, 0.11 * t);
    return sigma_base + noise_amplitude * value_noise(p / noise_scale + drift, 101u);
}

double FogField::plume_sigma(const Vec3& p, double t) const {
    double s = 0.0;
    for (const auto& plume : plumes) {
        if (plume.active(t) && (p - plume.center).squaredNorm() <= plume.radius * plume.radius) s += plume.sigma_boost;
    }
    return s;
}

FogField fog_from_config(const SimConfig& cfg) {
    FogField fog;
    fog.sigma_base = cfg.fog_density;
    fog.noise_amplitude = cfg.fog_intensity;
    return fog;
}

std::vector<DustPlume> periodic_plumes(const Aabb& pile_bounds, double duration, double period, Rng& rng) {
    std::vector<DustPlume> out;
    if (pile_bounds.empty() || !(period > 0.0)) return out;
    for (double start = 0.0; start < duration; start += period) {
        DustPlume p;
        p.center = Vec3(rng.uniform(pile_bounds.lo.x(), pile_bounds.hi.x()), rng.uniform(pile_bounds.lo.y(), pile_bounds.hi.y()),
                        pile_bounds.hi.z() * rng.uniform(0.5, 1.0));
        p.radius = rng.uniform(1.0, 2.5);
        p.sigma_boost = rng.uniform(0.5, 2.0);
        p.start = start;
        p.duration = 0.6 * period;
        out.push_back(p);
    }
    return out;
}

Vec3 pixel_ray(const Intrinsics& k, double u, double v) {
    const double f = k.focal();
    return {(u - k.cx()) / f, (v - k.cy()) / f, 1.0};
}

Vec3 shade(const RayHit& hit, const Vec3& view_dir, double range, const LightingRig& rig) {
    const Vec3& n = hit.normal;
    const Vec3 to_eye = -view_dir;
    Vec3 out = kAmbient * hit.albedo;
    auto add = [&](const Vec3& l, double a) {
        if (a <= 0.0) return;
        const double ndl = n.dot(l);
        if (ndl <= 0.0) return;
        out += hit.albedo * (ndl * a);
        if (hit.specular > 0.0) {
            const double ndh = std::max(0.0, n.dot((l + to_eye).normalized()));
            out += Vec3::Constant(hit.specular * std::pow(ndh, kSpecularExponent) * a);
        }
    };

    const GlobalLight& g = rig.global;
    if (g.intensity > 0.0) {
        if (g.type == LightType::Directional) {
            add(-g.direction(), g.intensity);
        } else {
            const Vec3 d = g.position - hit.point;
            const double dist2 = d.squaredNorm();
            const Vec3 l = d / std::sqrt(dist2);
            double a = g.intensity / dist2;
            if (g.type == LightType::Spot) {
                const double cone = deg_to_rad(g.cone_deg);
                a *= smoothstep(std::cos(cone), std::cos(0.8 * cone), (-l).dot(g.direction()));
            }
            add(l, a);
        }
    }
    if (rig.headlamp.on && rig.headlamp.intensity > 0.0) add(to_eye, rig.headlamp.intensity / (range * range));
    return out;
}

Frame render_frame(const Scene& scene, const CameraState& camera, const LightingRig& rig, const FogField& fog,
                   double t, const RenderOptions& options) {
    Frame frame;
    const Intrinsics& k = camera.intrinsics;
    frame.width = k.width;
    frame.height = k.height;
    frame.pose = camera;
    frame.timestamp = t;
    const auto pixels = static_cast<std::size_t>(k.width) * static_cast<std::size_t>(k.height);
    frame.rgb.assign(3 * pixels, 0);
    frame.depth.assign(pixels, 0.0);
    if (options.debug) {
        frame.radiance.assign(3 * pixels, 0.0f);
        frame.hit_point.assign(3 * pixels, 0.0);
    }
    const Mat3 rot = camera.orientation.toRotationMatrix();
    const Vec3 fog_color = Vec3::Constant(kFogGray);
    const bool foggy = fog.sigma_base > 0.0 || fog.noise_amplitude > 0.0 || !fog.plumes.empty();

    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            const std::size_t px = static_cast<std::size_t>(v) * static_cast<std::size_t>(k.width) + static_cast<std::size_t>(u);
            const Vec3 ray_cam = pixel_ray(k, u + 0.5, v + 0.5);
            const double ray_len = ray_cam.norm();
            const Vec3 dir = rot * (ray_cam / ray_len);
            const auto hit = scene.ray_cast(camera.position, dir);

            Vec3 color = Vec3::Zero();
            double range = kSkyDistance;
            if (hit) {
                range = hit->distance;
                color = shade(*hit, dir, range, rig);
                frame.depth[px] = range / ray_len;
                if (options.debug) {
                    for (int c = 0; c < 3; ++c) frame.hit_point[3 * px + c] = hit->point[c];
                }
            }
            if (foggy) {
                const Vec3 end = camera.position + dir * range;
                double tau = fog.ambient_sigma(end, t) * range;
                if (!fog.plumes.empty()) {
                    const double ds = range / kPlumeSamples;
                    for (int s = 0; s < kPlumeSamples; ++s) {
                        tau += fog.plume_sigma(camera.position + dir * ((s + 0.5) * ds), t) * ds;
                    }
                }
                const double transmittance = std::exp(-tau);
                color = transmittance * color + (1.0 - transmittance) * fog_color;
            }
            for (int c = 0; c < 3; ++c) {
                if (options.debug) frame.radiance[3 * px + c] = static_cast<float>(color[c]);
                const double q = std::round(std::clamp(color[c], 0.0, 1.0) * 255.0);
                frame.rgb[3 * px + c] = static_cast<std::uint8_t>(q);
            }
        }
    }
    return frame;
}

}  // namespace rubble
