#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rubble/math.hpp"

namespace rubble {

enum class LightType { Spot, Directional, Point };
enum class PositionDistribution { Uniform, Gaussian };

std::string_view to_string(LightType t);
std::string_view to_string(PositionDistribution d);

/// Complete parameter set for one simulation run.
///
/// Flag and file key names follow the pile/lighting/effects parameter table
/// (`spawnposx`, `numlayers`, `lighttype`, `fogdensity`, ...). Asset weights
/// use the key `assetweight.<class id>`.
struct SimConfig {
    std::uint64_t seed = 1;

    // Spawn volume: center and per-axis half-extents (meters). The z
    // half-extent sets the vertical jitter range [0, 2 * spawnboundz].
    Vec3 spawn_center = Vec3(0.0, 0.0, 0.0);
    Vec3 spawn_half_extent = Vec3(5.0, 5.0, 0.25);
    int num_layers = 5;
    int objs_per_layer = 100;

    bool fixed_light_rotation = true;
    LightType light_type = LightType::Directional;
    double light_intensity = 1.0;
    Vec3 light_rotation_deg = Vec3::Zero();
    Vec3 light_position = Vec3(0.0, 0.0, 10.0);

    double fog_density = 0.0;    // 1/m
    double fog_intensity = 0.0;  // noise amplitude, 1/m

    bool headlamp_on = false;
    double headlamp_intensity = 1.0;

    PositionDistribution position_distribution = PositionDistribution::Uniform;
    Vec3 position_sigma = Vec3(2.5, 2.5, 0.0);  // gaussian std-dev per axis, m

    double voxel_resolution = 0.10;

    std::map<std::string, double> asset_weights = {
        {"beam", 2.0},  {"brick", 4.0},   {"chunk", 2.0},
        {"cinder_block", 4.0}, {"culvert", 1.0}, {"slab", 3.0},
    };

    bool operator==(const SimConfig&) const = default;
};

/// Throws ConfigError naming the first violated field.
void validate(const SimConfig& cfg);

/// Parses `--name value` / `--name=value` flags over defaults. A
/// `--config <path>` file is applied first, then the remaining flags.
SimConfig parse_config(std::span<const std::string> args);
SimConfig parse_config(std::span<const std::string> args, const SimConfig& base);

/// Parses key=value text (same keys as the flags, `#` comments).
SimConfig parse_config_text(std::string_view text, const SimConfig& base = {});
SimConfig load_config_file(const std::string& path, const SimConfig& base = {});

/// Canonical key=value text; parse_config_text(serialize(c)) == c.
std::string serialize(const SimConfig& cfg);

/// FNV-1a 64 over the canonical serialization.
std::uint64_t config_hash(const SimConfig& cfg);
std::string hash_hex(std::uint64_t digest);

/// Every accepted flag name, in canonical order.
std::vector<std::string> config_flag_names();

/// Help text listing every flag with its description and default.
std::string config_help();

/// True when `name` (without leading dashes) is a configuration key.
bool is_config_key(std::string_view name);

}  // namespace rubble
