#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "rubble/collision.hpp"
#include "rubble/deposition.hpp"
#include "rubble/physics.hpp"

using namespace rubble;

namespace {

// Mean of the rotation-angle density (1 - cos t) / pi on [0, pi], by Simpson's rule.
double mean_rotation_angle_oracle() {
    const int n = 2000;
    const double h = kPi / n;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double t = i * h;
        const double f = t / kPi * (1.0 - std::cos(t));
        sum += (i == 0 || i == n) ? f : (i % 2 ? 4 * f : 2 * f);
    }
    return sum * h / 3.0;
}

Catalog cube_catalog(double size = 1.0) { return Catalog({test::box_class("cube", Vec3::Constant(size))}); }

SimConfig small_config(std::uint64_t seed, int layers = 2, int objs = 20) {
    SimConfig c;
    c.seed = seed;
    c.num_layers = layers;
    c.objs_per_layer = objs;
    c.spawn_half_extent = Vec3(2.5, 2.5, 0.25);
    return c;
}

}  // namespace

TEST(Orientation, UnitNorm) {
    Rng rng(1);
    for (int i = 0; i < 10000; ++i) ASSERT_NEAR(sample_orientation(rng).norm(), 1.0, 1e-9);
}

TEST(Orientation, MeanRotationAngle) {
    const double oracle = rad_to_deg(mean_rotation_angle_oracle());
    EXPECT_NEAR(oracle, 126.47, 0.01);
    Rng rng(2);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const Quat q = sample_orientation(rng);
        sum += 2.0 * std::acos(std::min(1.0, std::abs(q.w())));
    }
    EXPECT_NEAR(rad_to_deg(sum / n), oracle, 0.5);
}

TEST(Orientation, SeededSequenceRepeats) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        const Quat qa = sample_orientation(a), qb = sample_orientation(b);
        ASSERT_EQ(qa.coeffs(), qb.coeffs());
    }
}

TEST(Spawn, CountMatchesNumobjs) {
    SimConfig cfg;
    cfg.objs_per_layer = 250;
    cfg.spawn_half_extent.z() = 0.5;
    const Catalog catalog = default_catalog();
    Pile pile;
    pile.catalog = std::make_shared<const Catalog>(catalog);
    Rng rng(cfg.seed);
    const auto bodies = spawn_layer(pile, cfg, catalog, 0, rng);
    EXPECT_EQ(bodies.size(), 250u);
    for (const auto& b : bodies) {
        EXPECT_EQ(b.linear_velocity, Vec3::Zero());
        EXPECT_NEAR(b.orientation.norm(), 1.0, 1e-12);
    }
}

TEST(Spawn, SingleBodyHeight) {
    SimConfig cfg;
    cfg.objs_per_layer = 1;
    const Catalog catalog = cube_catalog(0.2);
    Pile pile;
    pile.catalog = std::make_shared<const Catalog>(catalog);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const auto bodies = spawn_layer(pile, cfg, catalog, 0, rng);
        ASSERT_EQ(bodies.size(), 1u);
        EXPECT_GE(bodies[0].position.z(), 1.0);
        EXPECT_LE(bodies[0].position.z(), 1.5);
    }
}

TEST(Spawn, UniformMoments) {
    SimConfig cfg;
    cfg.objs_per_layer = 100;
    cfg.spawn_center = Vec3(1.0, -2.0, 0.0);
    const Catalog catalog = cube_catalog(0.1);
    Pile pile;
    pile.catalog = std::make_shared<const Catalog>(catalog);
    Rng rng(7);
    Vec3 sum = Vec3::Zero();
    const int n = 10000;
    for (int i = 0; i < n / 100; ++i) {
        for (const auto& b : spawn_layer(pile, cfg, catalog, 0, rng)) sum += b.position;
    }
    const double sigma = 2.0 * cfg.spawn_half_extent.x() / std::sqrt(12.0);
    EXPECT_NEAR(sum.x() / n, 1.0, 3 * sigma / std::sqrt(n));
    EXPECT_NEAR(sum.y() / n, -2.0, 3 * sigma / std::sqrt(n));
}

TEST(Spawn, NoOverlapAtSpawn) {
    SimConfig cfg;
    cfg.objs_per_layer = 150;
    const Catalog catalog = default_catalog();
    Pile pile;
    pile.catalog = std::make_shared<const Catalog>(catalog);
    Rng rng(4);
    const auto bodies = spawn_layer(pile, cfg, catalog, 0, rng);
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        const auto& a = catalog.at(bodies[i].class_index);
        const Pose pa{bodies[i].position, bodies[i].orientation.toRotationMatrix()};
        for (std::size_t j = i + 1; j < bodies.size(); ++j) {
            const auto& b = catalog.at(bodies[j].class_index);
            const Pose pb{bodies[j].position, bodies[j].orientation.toRotationMatrix()};
            ASSERT_GT(separation(*a.collider, pa, *b.collider, pb), 0.0) << i << " " << j;
        }
    }
}

TEST(Spawn, FootprintTooSmall) {
    SimConfig cfg;
    cfg.objs_per_layer = 200;
    cfg.spawn_half_extent = Vec3(0.3, 0.3, 0.01);
    const Catalog catalog = default_catalog();
    Pile pile;
    pile.catalog = std::make_shared<const Catalog>(catalog);
    Rng rng(1);
    EXPECT_THROW(spawn_layer(pile, cfg, catalog, 0, rng), SpawnError);
}

TEST(Settle, SingleBoxDrop) {
    const Catalog catalog = cube_catalog();
    std::vector<BodyInstance> bodies(1);
    bodies[0].position = Vec3(0, 0, 1.5);
    const auto r = settle(bodies, catalog);
    EXPECT_TRUE(bodies[0].asleep);
    EXPECT_NEAR(bodies[0].position.z() - 0.5, 0.0, 0.02);
    EXPECT_LT(quat_distance(bodies[0].orientation, Quat::Identity()), 1e-3);
    EXPECT_GT(r.steps, 0);
}

TEST(Settle, TwoStackedBoxes) {
    const Catalog catalog = cube_catalog();
    std::vector<BodyInstance> bodies(2);
    bodies[0].position = Vec3(0, 0, 0.6);
    bodies[1].position = Vec3(0, 0, 1.8);
    settle(bodies, catalog);
    EXPECT_TRUE(bodies[0].asleep && bodies[1].asleep);
    EXPECT_NEAR(bodies[0].position.z(), 0.5, 0.02);
    EXPECT_NEAR(bodies[1].position.z() - 0.5, 1.0, 0.02);
    EXPECT_NEAR(bodies[1].position.x(), 0.0, 0.02);
}

TEST(Settle, KineticEnergyBound) {
    const Catalog catalog = default_catalog();
    Pile pile = build_pile(small_config(3, 1, 30), catalog);
    const PhysicsParams p;
    double ke = 0.0, bound = 0.0;
    for (const auto& b : pile.instances) {
        const auto& a = pile.catalog->at(b.class_index);
        const Vec3 w = b.orientation.conjugate() * b.angular_velocity;
        ke += 0.5 * a.mass * b.linear_velocity.squaredNorm() + 0.5 * w.dot(a.inertia.cwiseProduct(w));
        bound += 0.5 * a.mass * p.sleep_linear * p.sleep_linear +
                 0.5 * a.inertia.maxCoeff() * p.sleep_angular * p.sleep_angular;
    }
    EXPECT_LT(ke, bound);
}

TEST(Settle, NonConvergenceReportsBodies) {
    const Catalog catalog = cube_catalog();
    std::vector<BodyInstance> bodies(1);
    bodies[0].position = Vec3(0, 0, 5.0);
    PhysicsParams p;
    p.max_steps = 100;
    try {
        settle(bodies, catalog, p);
        FAIL();
    } catch (const SettleError& e) {
        ASSERT_EQ(e.bodies().size(), 1u);
        EXPECT_EQ(e.bodies()[0], 0u);
        EXPECT_GT(e.kinetic_energy(), 0.0);
    }
}

TEST(BuildPile, DeterministicAndComplete) {
    const Catalog catalog = default_catalog();
    const SimConfig cfg = small_config(11, 3, 25);
    const Pile a = build_pile(cfg, catalog);
    const Pile b = build_pile(cfg, catalog);
    ASSERT_EQ(a.instances.size(), 75u);
    EXPECT_EQ(a.instances, b.instances);
    EXPECT_EQ(a.config_hash, config_hash(cfg));
    EXPECT_EQ(a.seed, 11u);
    const PileCheck check = check_pile(a);
    EXPECT_TRUE(check.all_asleep);
    EXPECT_EQ(check.floaters, 0u);
    EXPECT_LE(check.max_penetration, PhysicsParams{}.penetration_tolerance);
    EXPECT_GE(check.min_center_z, -0.01);
}

TEST(BuildPile, SeedChangesPile) {
    const Catalog catalog = default_catalog();
    const Pile a = build_pile(small_config(1, 1, 10), catalog);
    const Pile b = build_pile(small_config(2, 1, 10), catalog);
    EXPECT_NE(a.instances, b.instances);
}

TEST(BuildPile, ProgressEvents) {
    const Catalog catalog = default_catalog();
    int last_layer = 0;
    long last_steps = -1;
    build_pile(small_config(5, 2, 10), catalog, {}, [&](const BuildProgress& p) {
        EXPECT_GE(p.layer, last_layer);
        EXPECT_GE(p.steps, last_steps);
        last_layer = p.layer;
        last_steps = p.steps;
    });
    EXPECT_EQ(last_layer, 2);
}

TEST(Collision, BoxesFaceContact) {
    const auto box = ConvexPolyhedron::box(Vec3::Constant(0.5));
    const Pose pa{Vec3::Zero(), Mat3::Identity()};
    const Pose pb{Vec3(0, 0, 0.99), Mat3::Identity()};
    EXPECT_NEAR(separation(box, pa, box, pb), -0.01, 1e-12);
    Manifold m;
    ASSERT_TRUE(collide(box, pa, box, pb, 0.02, m));
    EXPECT_EQ(m.count, 4);
    EXPECT_NEAR(std::abs(m.normal.z()), 1.0, 1e-12);
    const Pose far{Vec3(0, 0, 1.5), Mat3::Identity()};
    EXPECT_FALSE(collide(box, pa, box, far, 0.02, m));
    EXPECT_NEAR(separation(box, pa, box, far), 0.5, 1e-12);
}

TEST(Collision, EdgeEdgeSeparation) {
    const auto box = ConvexPolyhedron::box(Vec3::Constant(0.5));
    const Pose pa{Vec3::Zero(), axis_angle(Vec3::UnitX(), kPi / 4).toRotationMatrix()};
    const Pose pb{Vec3(0, 0, 1.5), axis_angle(Vec3::UnitY(), kPi / 4).toRotationMatrix()};
    // Crossed edges at heights sqrt(0.5) above a and below b.
    EXPECT_NEAR(separation(box, pa, box, pb), 1.5 - 2 * std::sqrt(0.5), 1e-9);
}

TEST(Collision, GroundContact) {
    const auto box = ConvexPolyhedron::box(Vec3::Constant(0.5));
    Manifold m;
    ASSERT_TRUE(collide_ground(box, Pose{Vec3(0, 0, 0.49), Mat3::Identity()}, 0.02, m));
    EXPECT_EQ(m.count, 4);
    EXPECT_FALSE(collide_ground(box, Pose{Vec3(0, 0, 0.6), Mat3::Identity()}, 0.02, m));
}
