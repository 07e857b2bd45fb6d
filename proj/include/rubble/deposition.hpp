#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "rubble/assets.hpp"
#include "rubble/bvh.hpp"
#include "rubble/config.hpp"
#include "rubble/error.hpp"
#include "rubble/physics.hpp"
#include "rubble/rng.hpp"

namespace rubble {

struct BodyInstance {
    std::size_t class_index = 0;
    Vec3 position = Vec3::Zero();
    Quat orientation = Quat::Identity();  // stored scalar-last as (x, y, z, w)
    Vec3 linear_velocity = Vec3::Zero();
    Vec3 angular_velocity = Vec3::Zero();
    bool asleep = false;

    bool operator==(const BodyInstance& o) const {
        return class_index == o.class_index && position == o.position && orientation.coeffs() == o.orientation.coeffs() &&
               linear_velocity == o.linear_velocity && angular_velocity == o.angular_velocity && asleep == o.asleep;
    }
};

/// A settled rubble pile resting on the ground plane z = 0.
struct Pile {
    std::shared_ptr<const Catalog> catalog;
    std::vector<BodyInstance> instances;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    long settle_steps = 0;
    Scene scene;

    [[nodiscard]] const AssetClass& asset(std::size_t instance) const {
        return catalog->at(instances[instance].class_index);
    }
    [[nodiscard]] Pose pose(std::size_t instance) const {
        return {instances[instance].position, instances[instance].orientation.toRotationMatrix()};
    }
    /// Top of the highest render-mesh vertex; 0 for an empty pile.
    [[nodiscard]] double max_height() const;
    [[nodiscard]] Aabb bounds() const;

    /// Rebuilds the triangle soup and BVH from the instances.
    void rebuild_scene();
};

class SpawnError : public Error {
public:
    using Error::Error;
};

class SettleError : public Error {
public:
    SettleError(const std::string& what, std::vector<std::size_t> bodies, double kinetic_energy)
        : Error(what), bodies_(std::move(bodies)), kinetic_energy_(kinetic_energy) {}
    [[nodiscard]] const std::vector<std::size_t>& bodies() const { return bodies_; }
    [[nodiscard]] double kinetic_energy() const { return kinetic_energy_; }

private:
    std::vector<std::size_t> bodies_;
    double kinetic_energy_;
};

/// Uniform rotation (subgroup algorithm, three uniform draws).
Quat sample_orientation(Rng& rng);

inline constexpr double kDropClearance = 1.0;  // m above the current pile top
inline constexpr int kSpawnAttempts = 100;

/// Places `cfg.objs_per_layer` new bodies above the pile. Bodies do not
/// overlap each other or the pile. Throws SpawnError.
std::vector<BodyInstance> spawn_layer(const Pile& pile, const SimConfig& cfg, const Catalog& catalog, int layer_index,
                                      Rng& rng);

struct SettleResult {
    long steps = 0;
    double kinetic_energy = 0.0;
};

using StepObserver = std::function<void(long step, std::size_t awake)>;

/// Runs rigid-body dynamics until every body sleeps and touches the ground
/// or another body. Bodies flagged `asleep` start static. Throws SettleError.
SettleResult settle(std::vector<BodyInstance>& bodies, const Catalog& catalog, const PhysicsParams& params = {},
                    const StepObserver& observer = {});

struct BuildProgress {
    int layer = 0;
    long steps = 0;
};
using ProgressCallback = std::function<void(const BuildProgress&)>;

/// Spawn-and-settle for each layer; deterministic in (seed, config, catalog).
/// The catalog's weights are overridden by `cfg.asset_weights`.
Pile build_pile(const SimConfig& cfg, const Catalog& catalog, const PhysicsParams& params = {},
                const ProgressCallback& progress = {});

struct PileCheck {
    bool all_asleep = true;
    std::size_t floaters = 0;
    double max_penetration = 0.0;
    double min_center_z = 0.0;
};

/// Evaluates the settled-pile post-conditions.
PileCheck check_pile(const Pile& pile, const PhysicsParams& params = {});

}  // namespace rubble
