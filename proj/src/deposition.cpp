#include "rubble/deposition.hpp"

#include <numeric>
#include <sstream>

#include "rubble/collision.hpp"

namespace rubble {

namespace {

double texture_amplitude(const AssetClass& a) {
    if (!a.texture_id) return 0.0;
    if (*a.texture_id == "concrete") return 0.30;
    if (*a.texture_id == "brick") return 0.18;
    if (*a.texture_id == "none") return 0.0;
    return 0.2;
}

Aabb world_bounds(const ConvexPolyhedron& mesh, const Pose& pose) {
    Aabb box;
    for (const auto& v : mesh.vertices()) box.grow(pose.apply(v));
    return box;
}

}  // namespace

double Pile::max_height() const {
    double top = 0.0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        top = std::max(top, world_bounds(*asset(i).render_mesh, pose(i)).hi.z());
    }
    return top;
}

Aabb Pile::bounds() const {
    Aabb box;
    for (std::size_t i = 0; i < instances.size(); ++i) box.grow(world_bounds(*asset(i).render_mesh, pose(i)));
    return box;
}

void Pile::rebuild_scene() {
    std::vector<Triangle> tris;
    std::vector<SurfaceInfo> surfaces;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const AssetClass& a = asset(i);
        const Pose p = pose(i);
        const auto& verts = a.render_mesh->vertices();
        for (const auto& t : a.render_mesh->triangles()) {
            Triangle tri;
            tri.v0 = p.apply(verts[t[0]]);
            tri.v1 = p.apply(verts[t[1]]);
            tri.v2 = p.apply(verts[t[2]]);
            tri.normal = (tri.v1 - tri.v0).cross(tri.v2 - tri.v0).normalized();
            tri.instance = static_cast<int>(i);
            tris.push_back(tri);
        }
        surfaces.push_back({instances[i].class_index, a.albedo, texture_amplitude(a), 8.0});
    }
    scene = Scene(std::move(tris), std::move(surfaces), true);
}

Quat sample_orientation(Rng& rng) {
    const double u1 = rng.uniform();
    const double u2 = rng.uniform();
    const double u3 = rng.uniform();
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    const double t2 = 2.0 * kPi * u2, t3 = 2.0 * kPi * u3;
    return Quat(b * std::cos(t3), a * std::sin(t2), a * std::cos(t2), b * std::sin(t3));
}

std::vector<BodyInstance> spawn_layer(const Pile& pile, const SimConfig& cfg, const Catalog& catalog, int layer_index,
                                      Rng& rng) {
    constexpr double kGap = 0.01;
    const double top = pile.max_height();
    const double base = top + (layer_index == 0 ? cfg.spawn_center.z() : 0.0);
    const double jitter_range = 2.0 * cfg.spawn_half_extent.z();
    const Vec3 c = cfg.spawn_center;
    const Vec3 h = cfg.spawn_half_extent;

    std::vector<Aabb> pile_boxes;
    for (std::size_t i = 0; i < pile.instances.size(); ++i) {
        pile_boxes.push_back(world_bounds(*pile.asset(i).collider, pile.pose(i)));
    }

    auto draw_xy = [&]() -> Eigen::Vector2d {
        if (cfg.position_distribution == PositionDistribution::Uniform) {
            const double x = rng.uniform(c.x() - h.x(), c.x() + h.x());
            const double y = rng.uniform(c.y() - h.y(), c.y() + h.y());
            return {x, y};
        }
        Eigen::Vector2d p;
        for (int t = 0; t < kSpawnAttempts; ++t) {
            p = {c.x() + cfg.position_sigma.x() * rng.normal(), c.y() + cfg.position_sigma.y() * rng.normal()};
            if (std::abs(p.x() - c.x()) <= h.x() && std::abs(p.y() - c.y()) <= h.y()) return p;
        }
        return {std::clamp(p.x(), c.x() - h.x(), c.x() + h.x()), std::clamp(p.y(), c.y() - h.y(), c.y() + h.y())};
    };

    std::vector<BodyInstance> out;
    std::vector<Pose> poses;
    out.reserve(static_cast<std::size_t>(cfg.objs_per_layer));
    for (int k = 0; k < cfg.objs_per_layer; ++k) {
        const std::size_t cls = sample_class(catalog, rng);
        const AssetClass& asset = catalog.at(cls);
        const double radius = asset.collider->bounding_radius();
        const double clearance = std::max(kDropClearance, radius + kGap);
        bool placed = false;
        for (int attempt = 0; attempt < kSpawnAttempts && !placed; ++attempt) {
            const Eigen::Vector2d xy = draw_xy();
            const double z = base + clearance + rng.uniform(0.0, jitter_range);
            const Quat q = sample_orientation(rng);
            const Pose pose{Vec3(xy.x(), xy.y(), z), q.toRotationMatrix()};
            bool ok = true;
            for (std::size_t j = 0; j < out.size() && ok; ++j) {
                const AssetClass& other = catalog.at(out[j].class_index);
                const double reach = radius + other.collider->bounding_radius() + kGap;
                if ((out[j].position - pose.position).squaredNorm() > reach * reach) continue;
                ok = separation(*asset.collider, pose, *other.collider, poses[j]) > kGap;
            }
            if (ok && z - radius < top + kGap) {
                const Aabb probe = Aabb{pose.position, pose.position}.inflated(radius + kGap);
                for (std::size_t j = 0; j < pile_boxes.size() && ok; ++j) {
                    if (!probe.overlaps(pile_boxes[j])) continue;
                    ok = separation(*asset.collider, pose, *pile.asset(j).collider, pile.pose(j)) > kGap;
                }
            }
            if (ok) {
                BodyInstance b;
                b.class_index = cls;
                b.position = pose.position;
                b.orientation = q;
                out.push_back(b);
                poses.push_back(pose);
                placed = true;
            }
        }
        if (!placed) {
            std::ostringstream os;
            os << "layer " << layer_index << ": could not place object " << k << " without overlap after "
               << kSpawnAttempts << " attempts (spawn footprint too small for numobjs=" << cfg.objs_per_layer << ")";
            throw SpawnError(os.str());
        }
    }
    return out;
}

SettleResult settle(std::vector<BodyInstance>& bodies, const Catalog& catalog, const PhysicsParams& params,
                    const StepObserver& observer) {
    World world(params);
    for (const auto& b : bodies) {
        const std::size_t i = world.add(catalog.at(b.class_index), b.class_index, b.position, b.orientation, b.asleep);
        world.bodies()[i].linear_velocity = b.linear_velocity;
        world.bodies()[i].angular_velocity = b.angular_velocity;
        world.bodies()[i].fixed = b.asleep && params.freeze_settled;
    }
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        if (!world.bodies()[i].fixed) all.push_back(i);
    }

    long steps = 0;
    for (;;) {
        if (world.awake_count() == 0) {
            const auto floaters = world.unsupported(all);
            if (floaters.empty()) break;
            for (std::size_t i : floaters) world.wake(i);
        }
        if (steps >= params.max_steps) {
            std::vector<std::size_t> offending;
            double energy = 0.0;
            for (std::size_t i = 0; i < world.bodies().size(); ++i) {
                if (!world.bodies()[i].asleep) {
                    offending.push_back(i);
                    energy += world.bodies()[i].kinetic_energy();
                }
            }
            std::ostringstream os;
            os << "settling did not converge within " << params.max_steps << " steps: " << offending.size()
               << " bodies awake, kinetic energy " << energy << " J";
            const RigidBody& first = world.bodies()[offending.front()];
            os << "; first " << first.asset->id << " at (" << first.position.transpose() << ") v "
               << first.linear_velocity.norm() << " w " << first.angular_velocity.norm();
            throw SettleError(os.str(), std::move(offending), energy);
        }
        world.step();
        ++steps;
        if (observer) observer(steps, world.awake_count());
    }

    SettleResult result;
    result.steps = steps;
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        const RigidBody& rb = world.bodies()[i];
        bodies[i].position = rb.position;
        bodies[i].orientation = rb.orientation;
        bodies[i].linear_velocity = rb.linear_velocity;
        bodies[i].angular_velocity = rb.angular_velocity;
        bodies[i].asleep = rb.asleep;
        result.kinetic_energy += rb.kinetic_energy();
    }
    return result;
}

Pile build_pile(const SimConfig& cfg, const Catalog& catalog, const PhysicsParams& params,
                const ProgressCallback& progress) {
    validate(cfg);
    Pile pile;
    pile.catalog = std::make_shared<const Catalog>(catalog.with_weights(cfg.asset_weights));
    pile.seed = cfg.seed;
    pile.config_hash = config_hash(cfg);
    Rng rng(cfg.seed);
    for (int layer = 0; layer < cfg.num_layers; ++layer) {
        auto fresh = spawn_layer(pile, cfg, *pile.catalog, layer, rng);
        pile.instances.insert(pile.instances.end(), fresh.begin(), fresh.end());
        StepObserver observer;
        if (progress) {
            observer = [&](long step, std::size_t) {
                if (step % 240 == 0) progress({layer + 1, pile.settle_steps + step});
            };
        }
        const SettleResult r = settle(pile.instances, *pile.catalog, params, observer);
        pile.settle_steps += r.steps;
        if (progress) progress({layer + 1, pile.settle_steps});
    }
    pile.rebuild_scene();
    return pile;
}

PileCheck check_pile(const Pile& pile, const PhysicsParams& params) {
    PileCheck out;
    World world(params);
    out.min_center_z = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pile.instances.size(); ++i) {
        const auto& b = pile.instances[i];
        out.all_asleep = out.all_asleep && b.asleep;
        world.add(pile.asset(i), b.class_index, b.position, b.orientation, true);
        out.min_center_z = std::min(out.min_center_z, world_bounds(*pile.asset(i).collider, pile.pose(i)).center().z());
    }
    if (pile.instances.empty()) out.min_center_z = 0.0;
    std::vector<std::size_t> all(pile.instances.size());
    std::iota(all.begin(), all.end(), 0);
    out.floaters = world.unsupported(all).size();
    out.max_penetration = world.max_penetration();
    return out;
}

}  // namespace rubble
