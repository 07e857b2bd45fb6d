#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "rubble/assets.hpp"
#include "rubble/collision.hpp"
#include "rubble/math.hpp"

namespace rubble {

struct PhysicsParams {
    Vec3 gravity = Vec3(0.0, 0.0, -9.81);
    double timestep = 1.0 / 240.0;
    int substeps = 8;
    double sleep_linear = 0.01;   // m/s
    double sleep_angular = 0.05;  // rad/s
    int sleep_frames = 60;
    long max_steps = 240L * 60L;
    double penetration_tolerance = 0.02;
    double contact_margin = 0.02;     // speculative contact distance
    double support_tolerance = 0.01;  // gap still counted as touching
    double contact_hertz = 120.0;
    double contact_damping_ratio = 10.0;
    double max_push_velocity = 3.0;  // m/s
    double linear_slop = 0.005;
    double restitution_threshold = 1.0;  // m/s closing speed
    double linear_damping = 0.2;         // 1/s
    double angular_damping = 1.0;        // 1/s
    double wake_speed = 0.05;            // m/s
    double rest_damping = 0.5;           // velocity fraction removed per step below the sleep thresholds
    double ground_friction = 0.7;
    bool freeze_settled = true;  // bodies that enter settle() asleep stay static
};

struct RigidBody {
    const AssetClass* asset = nullptr;
    std::size_t class_index = 0;
    Vec3 position = Vec3::Zero();
    Quat orientation = Quat::Identity();
    Vec3 linear_velocity = Vec3::Zero();
    Vec3 angular_velocity = Vec3::Zero();
    bool asleep = false;
    bool fixed = false;  // asleep and never woken
    int still_frames = 0;
    Vec3 anchor_position = Vec3::Zero();
    Quat anchor_orientation = Quat::Identity();

    // Per-step caches.
    Vec3 local_box_center = Vec3::Zero();
    Vec3 local_box_half = Vec3::Zero();
    Mat3 rotation = Mat3::Identity();
    Mat3 inv_inertia_world = Mat3::Zero();
    Aabb bounds;

    [[nodiscard]] Pose pose() const { return {position, rotation}; }
    [[nodiscard]] double kinetic_energy() const;
};

/// Fixed-step rigid-body world over convex bodies resting on the plane z = 0.
///
/// Sleeping bodies act as static geometry until an awake body moving faster
/// than `wake_speed` touches them.
class World {
public:
    struct ConstraintPoint {
        Vec3 ra, rb;
        Vec3 local_b;
        double separation;  // adjusted so that anchors can move during substeps
        double normal_mass, tangent_mass1, tangent_mass2;
        double normal_impulse, tangent_impulse1, tangent_impulse2, max_normal_impulse;
        double approach_speed;
    };
    struct Constraint {
        int a, b;  // a == -1: ground
        Vec3 normal, tangent1, tangent2;
        double friction, restitution;
        int count;
        std::array<ConstraintPoint, 4> points;
    };

    explicit World(PhysicsParams params = {});

    std::size_t add(const AssetClass& asset, std::size_t class_index, const Vec3& position, const Quat& orientation,
                    bool asleep = false);

    void step();

    [[nodiscard]] std::vector<RigidBody>& bodies() { return bodies_; }
    [[nodiscard]] const std::vector<RigidBody>& bodies() const { return bodies_; }
    [[nodiscard]] const PhysicsParams& params() const { return params_; }
    [[nodiscard]] std::size_t awake_count() const;
    [[nodiscard]] long steps() const { return steps_; }

    /// Bodies with no contact (ground or other body within support_tolerance).
    [[nodiscard]] std::vector<std::size_t> unsupported(const std::vector<std::size_t>& candidates) const;
    void wake(std::size_t index);

    /// Deepest pairwise penetration over all overlapping bodies (>= 0).
    [[nodiscard]] double max_penetration() const;

    /// Contact constraints of the last step (ground contacts have a == -1).
    [[nodiscard]] const std::vector<Constraint>& constraints() const { return constraints_; }

private:
    struct CachedPoint {
        Vec3 local_b;
        double normal_impulse;
        Vec3 tangent_impulse;
    };
    struct CachedManifold {
        int count = 0;
        std::array<CachedPoint, 4> points;
    };
    struct Softness {
        double bias_rate = 0.0, mass_scale = 1.0, impulse_scale = 0.0;
    };
    struct SolverBody {
        Vec3 dp = Vec3::Zero();
        Quat dq = Quat::Identity();
        Mat3 dr = Mat3::Identity();
    };

    void update_caches(RigidBody& b) const;
    template <typename Fn>
    void for_each_neighbor(int i, Fn&& fn);
    void find_contacts();
    void add_constraint(int a, int b, const Manifold& m);
    void prepare_constraints();
    void warm_start();
    void solve_contacts(double inv_h, bool use_bias);
    void apply_restitution();
    void integrate_velocities(double h);
    void integrate_positions(double h);
    void update_sleep();
    void build_grid();

    PhysicsParams params_;
    std::vector<RigidBody> bodies_;
    std::vector<Constraint> constraints_;
    std::unordered_map<std::uint64_t, CachedManifold> cache_, next_cache_;
    std::unordered_map<std::uint64_t, SeparatingAxis> axes_, next_axes_;
    std::vector<SolverBody> solver_;
    Softness soft_, static_soft_;
    long steps_ = 0;

    // Uniform broadphase grid, rebuilt each step.
    Aabb grid_bounds_;
    double cell_ = 0.75;
    Eigen::Vector3i grid_dims_ = Eigen::Vector3i::Zero();
    std::vector<int> cell_start_, cell_items_;
    std::vector<std::uint32_t> stamp_;
    std::uint32_t stamp_counter_ = 0;
};

}  // namespace rubble
