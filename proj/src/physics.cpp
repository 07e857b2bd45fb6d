#include "rubble/physics.hpp"

#include <numeric>

namespace rubble {

namespace {

std::uint64_t pair_key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a + 1)) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

double RigidBody::kinetic_energy() const {
    const Mat3 r = orientation.toRotationMatrix();
    const Vec3 local_w = r.transpose() * angular_velocity;
    return 0.5 * asset->mass * linear_velocity.squaredNorm() +
           0.5 * local_w.dot(asset->inertia.cwiseProduct(local_w));
}

World::World(PhysicsParams params) : params_(params) {}

std::size_t World::add(const AssetClass& asset, std::size_t class_index, const Vec3& position,
                       const Quat& orientation, bool asleep) {
    RigidBody b;
    b.asset = &asset;
    b.class_index = class_index;
    b.position = position;
    b.orientation = orientation.normalized();
    b.asleep = asleep;
    b.anchor_position = b.position;
    b.anchor_orientation = b.orientation;
    Aabb local;
    for (const auto& v : asset.collider->vertices()) local.grow(v);
    b.local_box_center = local.center();
    b.local_box_half = 0.5 * local.extent();
    update_caches(b);
    bodies_.push_back(b);
    stamp_.push_back(0);
    return bodies_.size() - 1;
}

std::size_t World::awake_count() const {
    return static_cast<std::size_t>(std::count_if(bodies_.begin(), bodies_.end(), [](const RigidBody& b) { return !b.asleep; }));
}

void World::update_caches(RigidBody& b) const {
    b.rotation = b.orientation.toRotationMatrix();
    b.inv_inertia_world = b.rotation * b.asset->inertia.cwiseInverse().asDiagonal() * b.rotation.transpose();
    const Vec3 c = b.rotation * b.local_box_center + b.position;
    const Vec3 h = b.rotation.cwiseAbs() * b.local_box_half;
    double pad = 0.5 * params_.contact_margin;
    if (!b.asleep) pad += b.linear_velocity.norm() * params_.timestep;
    b.bounds.lo = c - h - Vec3::Constant(pad);
    b.bounds.hi = c + h + Vec3::Constant(pad);
}

void World::wake(std::size_t index) {
    RigidBody& b = bodies_[index];
    b.asleep = false;
    b.still_frames = 0;
    b.anchor_position = b.position;
    b.anchor_orientation = b.orientation;
}

void World::build_grid() {
    grid_bounds_ = Aabb{};
    for (const auto& b : bodies_) grid_bounds_.grow(b.bounds);
    const Vec3 ext = grid_bounds_.extent();
    for (int a = 0; a < 3; ++a) {
        grid_dims_[a] = std::clamp(static_cast<int>(std::ceil(ext[a] / cell_)), 1, 256);
    }
    const std::size_t ncells = static_cast<std::size_t>(grid_dims_.prod());
    cell_start_.assign(ncells + 1, 0);

    auto range = [&](const Aabb& box, Eigen::Vector3i& lo, Eigen::Vector3i& hi) {
        for (int a = 0; a < 3; ++a) {
            const double span = grid_bounds_.hi[a] - grid_bounds_.lo[a];
            const double inv = span > 0.0 ? grid_dims_[a] / span : 0.0;
            lo[a] = std::clamp(static_cast<int>((box.lo[a] - grid_bounds_.lo[a]) * inv), 0, grid_dims_[a] - 1);
            hi[a] = std::clamp(static_cast<int>((box.hi[a] - grid_bounds_.lo[a]) * inv), 0, grid_dims_[a] - 1);
        }
    };
    auto for_cells = [&](const Aabb& box, auto&& fn) {
        Eigen::Vector3i lo, hi;
        range(box, lo, hi);
        for (int z = lo.z(); z <= hi.z(); ++z)
            for (int y = lo.y(); y <= hi.y(); ++y)
                for (int x = lo.x(); x <= hi.x(); ++x)
                    fn(static_cast<std::size_t>((z * grid_dims_.y() + y) * grid_dims_.x() + x));
    };
    for (const auto& b : bodies_) for_cells(b.bounds, [&](std::size_t c) { ++cell_start_[c + 1]; });
    std::partial_sum(cell_start_.begin(), cell_start_.end(), cell_start_.begin());
    cell_items_.assign(static_cast<std::size_t>(cell_start_.back()), 0);
    std::vector<int> fill(cell_start_.begin(), cell_start_.end() - 1);
    for (int i = 0; i < static_cast<int>(bodies_.size()); ++i) {
        for_cells(bodies_[i].bounds, [&](std::size_t c) { cell_items_[static_cast<std::size_t>(fill[c]++)] = i; });
    }
}

void World::add_constraint(int a, int b, const Manifold& m) {
    Constraint c;
    c.a = a;
    c.b = b;
    c.normal = m.normal;
    tangent_basis(c.normal, c.tangent1, c.tangent2);
    const RigidBody& bb = bodies_[b];
    const double fa = a < 0 ? params_.ground_friction : bodies_[a].asset->friction;
    c.friction = std::sqrt(fa * bb.asset->friction);
    c.restitution = std::max(a < 0 ? 0.0 : bodies_[a].asset->restitution, bb.asset->restitution);
    c.count = m.count;
    for (int k = 0; k < m.count; ++k) {
        ConstraintPoint& p = c.points[k];
        p.separation = m.points[k].separation;
        p.ra = a < 0 ? Vec3::Zero() : Vec3(m.points[k].position - bodies_[a].position);
        p.rb = m.points[k].position - bb.position;
        p.local_b = bb.rotation.transpose() * p.rb;
        p.normal_impulse = p.tangent_impulse1 = p.tangent_impulse2 = 0.0;
    }
    constraints_.push_back(c);
}

template <typename Fn>
void World::for_each_neighbor(int i, Fn&& fn) {
    const RigidBody& bi = bodies_[i];
    ++stamp_counter_;
    Eigen::Vector3i lo, hi;
    for (int a = 0; a < 3; ++a) {
        const double span = grid_bounds_.hi[a] - grid_bounds_.lo[a];
        const double inv = span > 0.0 ? grid_dims_[a] / span : 0.0;
        lo[a] = std::clamp(static_cast<int>((bi.bounds.lo[a] - grid_bounds_.lo[a]) * inv), 0, grid_dims_[a] - 1);
        hi[a] = std::clamp(static_cast<int>((bi.bounds.hi[a] - grid_bounds_.lo[a]) * inv), 0, grid_dims_[a] - 1);
    }
    for (int z = lo.z(); z <= hi.z(); ++z) {
        for (int y = lo.y(); y <= hi.y(); ++y) {
            for (int x = lo.x(); x <= hi.x(); ++x) {
                const std::size_t c = static_cast<std::size_t>((z * grid_dims_.y() + y) * grid_dims_.x() + x);
                for (int k = cell_start_[c]; k < cell_start_[c + 1]; ++k) {
                    const int j = cell_items_[static_cast<std::size_t>(k)];
                    if (j == i || stamp_[j] == stamp_counter_) continue;
                    stamp_[j] = stamp_counter_;
                    if (bi.bounds.overlaps(bodies_[j].bounds)) fn(j);
                }
            }
        }
    }
}

void World::find_contacts() {
    constraints_.clear();
    next_axes_.clear();
    build_grid();
    const int n = static_cast<int>(bodies_.size());
    Manifold m;
    const double margin = params_.contact_margin;

    // Fast bodies wake the sleeping bodies they touch before any contact is
    // generated, so a woken body is never left without its supports.
    std::vector<int> to_wake;
    for (int i = 0; i < n; ++i) {
        const RigidBody& bi = bodies_[i];
        if (bi.asleep) continue;
        const double speed = bi.linear_velocity.norm() + bi.angular_velocity.norm() * bi.asset->collider->bounding_radius();
        if (speed <= params_.wake_speed) continue;
        for_each_neighbor(i, [&](int j) {
            const RigidBody& bj = bodies_[j];
            if (!bj.asleep || bj.fixed) return;
            const double reach = bi.asset->collider->bounding_radius() + bj.asset->collider->bounding_radius() + margin;
            if ((bi.position - bj.position).squaredNorm() > reach * reach) return;
            if (collide(*bi.asset->collider, bi.pose(), *bj.asset->collider, bj.pose(), margin, m)) to_wake.push_back(j);
        });
    }
    for (int j : to_wake) {
        if (bodies_[j].asleep) {
            wake(static_cast<std::size_t>(j));
            update_caches(bodies_[j]);
        }
    }

    for (int i = 0; i < n; ++i) {
        const RigidBody& bi = bodies_[i];
        if (bi.asleep) continue;
        if (bi.bounds.lo.z() <= margin && collide_ground(*bi.asset->collider, bi.pose(), margin, m)) {
            add_constraint(-1, i, m);
        }
        for_each_neighbor(i, [&](int j) {
            if (!bodies_[j].asleep && j < i) return;
            const int a = std::min(i, j), b = std::max(i, j);
            const RigidBody& ba = bodies_[a];
            const RigidBody& bb = bodies_[b];
            const double reach = ba.asset->collider->bounding_radius() + bb.asset->collider->bounding_radius() + margin;
            if ((ba.position - bb.position).squaredNorm() > reach * reach) return;
            const std::uint64_t key = pair_key(a, b);
            SeparatingAxis axis;
            if (const auto it = axes_.find(key); it != axes_.end()) axis = it->second;
            if (collide(*ba.asset->collider, ba.pose(), *bb.asset->collider, bb.pose(), margin, m, &axis)) {
                add_constraint(a, b, m);
            } else if (axis.kind != SeparatingAxis::None) {
                next_axes_[key] = axis;
            }
        });
    }
    std::swap(axes_, next_axes_);
}

void World::prepare_constraints() {
    const Vec3 zero = Vec3::Zero();
    for (auto& c : constraints_) {
        RigidBody* A = c.a < 0 ? nullptr : &bodies_[c.a];
        RigidBody& B = bodies_[c.b];
        const bool dyn_a = A && !A->asleep;
        const bool dyn_b = !B.asleep;
        const double ma = dyn_a ? 1.0 / A->asset->mass : 0.0;
        const double mb = dyn_b ? 1.0 / B.asset->mass : 0.0;
        const Mat3 ia = dyn_a ? A->inv_inertia_world : Mat3::Zero();
        const Mat3 ib = dyn_b ? B.inv_inertia_world : Mat3::Zero();
        const Vec3& va = dyn_a ? A->linear_velocity : zero;
        const Vec3& wa = dyn_a ? A->angular_velocity : zero;
        const auto cached = cache_.find(pair_key(c.a, c.b));

        for (int k = 0; k < c.count; ++k) {
            ConstraintPoint& p = c.points[k];
            auto eff = [&](const Vec3& dir) {
                const Vec3 ra_x = p.ra.cross(dir);
                const Vec3 rb_x = p.rb.cross(dir);
                const double k_val = ma + mb + ra_x.dot(ia * ra_x) + rb_x.dot(ib * rb_x);
                return k_val > 0.0 ? 1.0 / k_val : 0.0;
            };
            p.normal_mass = eff(c.normal);
            p.tangent_mass1 = eff(c.tangent1);
            p.tangent_mass2 = eff(c.tangent2);
            p.max_normal_impulse = 0.0;

            if (cached != cache_.end()) {
                for (int q = 0; q < cached->second.count; ++q) {
                    const CachedPoint& cp = cached->second.points[q];
                    if ((cp.local_b - p.local_b).squaredNorm() < 0.02 * 0.02) {
                        p.normal_impulse = cp.normal_impulse;
                        p.tangent_impulse1 = cp.tangent_impulse.dot(c.tangent1);
                        p.tangent_impulse2 = cp.tangent_impulse.dot(c.tangent2);
                        break;
                    }
                }
            }
            const Vec3 dv = B.linear_velocity + B.angular_velocity.cross(p.rb) - va - wa.cross(p.ra);
            p.approach_speed = dv.dot(c.normal);
            p.separation -= (p.rb - p.ra).dot(c.normal);
        }
    }
}

void World::warm_start() {
    for (auto& c : constraints_) {
        RigidBody* A = c.a < 0 ? nullptr : &bodies_[c.a];
        RigidBody& B = bodies_[c.b];
        const bool dyn_a = A && !A->asleep;
        const bool dyn_b = !B.asleep;
        for (int k = 0; k < c.count; ++k) {
            const ConstraintPoint& p = c.points[k];
            const Vec3 impulse = p.normal_impulse * c.normal + p.tangent_impulse1 * c.tangent1 + p.tangent_impulse2 * c.tangent2;
            if (dyn_a) {
                A->linear_velocity -= impulse / A->asset->mass;
                A->angular_velocity -= A->inv_inertia_world * p.ra.cross(impulse);
            }
            if (dyn_b) {
                B.linear_velocity += impulse / B.asset->mass;
                B.angular_velocity += B.inv_inertia_world * p.rb.cross(impulse);
            }
        }
    }
}

void World::solve_contacts(double inv_h, bool use_bias) {
    const Vec3 zero = Vec3::Zero();
    const SolverBody fixed;
    for (auto& c : constraints_) {
        RigidBody* A = c.a < 0 ? nullptr : &bodies_[c.a];
        RigidBody& B = bodies_[c.b];
        const bool dyn_a = A && !A->asleep;
        const bool dyn_b = !B.asleep;
        const double ma = dyn_a ? 1.0 / A->asset->mass : 0.0;
        const double mb = dyn_b ? 1.0 / B.asset->mass : 0.0;
        // Static partners (ground, sleeping bodies) have zero velocity.
        Vec3 static_v = zero, static_w = zero;
        Vec3& va = dyn_a ? A->linear_velocity : static_v;
        Vec3& wa = dyn_a ? A->angular_velocity : static_w;
        Vec3& vb = B.linear_velocity;
        Vec3& wb = B.angular_velocity;
        const SolverBody& sa = dyn_a ? solver_[c.a] : fixed;
        const SolverBody& sb = dyn_b ? solver_[c.b] : fixed;
        const Softness& soft = (dyn_a && dyn_b) ? soft_ : static_soft_;

        auto apply = [&](const ConstraintPoint& p, const Vec3& impulse) {
            if (dyn_a) {
                va -= ma * impulse;
                wa -= A->inv_inertia_world * p.ra.cross(impulse);
            }
            if (dyn_b) {
                vb += mb * impulse;
                wb += B.inv_inertia_world * p.rb.cross(impulse);
            }
        };

        const Vec3 dp = sb.dp - sa.dp;
        for (int k = 0; k < c.count; ++k) {
            ConstraintPoint& p = c.points[k];
            const double s = (dp + sb.dr * p.rb - sa.dr * p.ra).dot(c.normal) + p.separation;
            double bias = 0.0, mass_scale = 1.0, impulse_scale = 0.0;
            if (s > 0.0) {
                bias = s * inv_h;
            } else if (use_bias) {
                bias = std::max(soft.bias_rate * std::min(s + params_.linear_slop, 0.0), -params_.max_push_velocity);
                mass_scale = soft.mass_scale;
                impulse_scale = soft.impulse_scale;
            }
            const Vec3 dv = vb + wb.cross(p.rb) - va - wa.cross(p.ra);
            const double vn = dv.dot(c.normal);
            const double lambda = -p.normal_mass * mass_scale * (vn + bias) - impulse_scale * p.normal_impulse;
            const double old = p.normal_impulse;
            p.normal_impulse = std::max(old + lambda, 0.0);
            p.max_normal_impulse = std::max(p.max_normal_impulse, p.normal_impulse);
            apply(p, (p.normal_impulse - old) * c.normal);
        }
        for (int k = 0; k < c.count; ++k) {
            ConstraintPoint& p = c.points[k];
            const Vec3 dv = vb + wb.cross(p.rb) - va - wa.cross(p.ra);
            const double old1 = p.tangent_impulse1, old2 = p.tangent_impulse2;
            double t1 = old1 - p.tangent_mass1 * dv.dot(c.tangent1);
            double t2 = old2 - p.tangent_mass2 * dv.dot(c.tangent2);
            const double limit = c.friction * p.normal_impulse;
            const double len = std::hypot(t1, t2);
            if (len > limit) {
                const double scale = limit / len;
                t1 *= scale;
                t2 *= scale;
            }
            p.tangent_impulse1 = t1;
            p.tangent_impulse2 = t2;
            apply(p, (t1 - old1) * c.tangent1 + (t2 - old2) * c.tangent2);
        }
    }
}

void World::apply_restitution() {
    for (auto& c : constraints_) {
        if (c.restitution == 0.0) continue;
        RigidBody* A = c.a < 0 ? nullptr : &bodies_[c.a];
        RigidBody& B = bodies_[c.b];
        const bool dyn_a = A && !A->asleep;
        const bool dyn_b = !B.asleep;
        for (int k = 0; k < c.count; ++k) {
            ConstraintPoint& p = c.points[k];
            if (p.approach_speed > -params_.restitution_threshold || p.max_normal_impulse == 0.0) continue;
            Vec3 dv = B.linear_velocity + B.angular_velocity.cross(p.rb);
            if (dyn_a) dv -= A->linear_velocity + A->angular_velocity.cross(p.ra);
            const double vn = dv.dot(c.normal);
            const double lambda = -p.normal_mass * (vn + c.restitution * p.approach_speed);
            const double old = p.normal_impulse;
            p.normal_impulse = std::max(old + lambda, 0.0);
            const Vec3 impulse = (p.normal_impulse - old) * c.normal;
            if (dyn_a) {
                A->linear_velocity -= impulse / A->asset->mass;
                A->angular_velocity -= A->inv_inertia_world * p.ra.cross(impulse);
            }
            if (dyn_b) {
                B.linear_velocity += impulse / B.asset->mass;
                B.angular_velocity += B.inv_inertia_world * p.rb.cross(impulse);
            }
        }
    }
}

void World::integrate_velocities(double h) {
    const double lin = 1.0 / (1.0 + h * params_.linear_damping);
    const double ang = 1.0 / (1.0 + h * params_.angular_damping);
    for (auto& b : bodies_) {
        if (b.asleep) continue;
        b.linear_velocity = (b.linear_velocity + params_.gravity * h) * lin;
        b.angular_velocity *= ang;
    }
}

void World::integrate_positions(double h) {
    for (std::size_t i = 0; i < bodies_.size(); ++i) {
        RigidBody& b = bodies_[i];
        if (b.asleep) continue;
        SolverBody& s = solver_[i];
        const Vec3& w = b.angular_velocity;
        const Quat spin(0.0, w.x(), w.y(), w.z());
        b.position += b.linear_velocity * h;
        b.orientation.coeffs() += 0.5 * h * (spin * b.orientation).coeffs();
        b.orientation.normalize();
        s.dp += b.linear_velocity * h;
        s.dq.coeffs() += 0.5 * h * (spin * s.dq).coeffs();
        s.dq.normalize();
        s.dr = s.dq.toRotationMatrix();
    }
}

void World::update_sleep() {
    const double window = params_.timestep;
    for (auto& b : bodies_) {
        if (b.asleep) continue;
        const bool still = b.linear_velocity.norm() < params_.sleep_linear && b.angular_velocity.norm() < params_.sleep_angular;
        if (still) {
            b.linear_velocity *= 1.0 - params_.rest_damping;
            b.angular_velocity *= 1.0 - params_.rest_damping;
        }
        // Mean velocity over the window, so contact jitter that goes nowhere still counts as rest.
        ++b.still_frames;
        if (b.still_frames < params_.sleep_frames) continue;
        const double t = b.still_frames * window;
        const double drift = (b.position - b.anchor_position).norm() / t;
        const double turn = b.orientation.angularDistance(b.anchor_orientation) / t;
        if (drift >= params_.sleep_linear || turn >= params_.sleep_angular) {
            b.still_frames = 0;
            b.anchor_position = b.position;
            b.anchor_orientation = b.orientation;
        }
    }
    // A body sleeps only together with the awake bodies it touches, so it never
    // turns static underneath a neighbour that is still settling.
    std::vector<char> ready(bodies_.size());
    for (std::size_t i = 0; i < bodies_.size(); ++i) {
        ready[i] = !bodies_[i].asleep && bodies_[i].still_frames >= params_.sleep_frames;
    }
    std::vector<char> blocked(bodies_.size(), 0);
    for (const auto& c : constraints_) {
        if (c.a < 0 || bodies_[c.a].asleep || bodies_[c.b].asleep) continue;
        if (!ready[c.a]) blocked[c.b] = 1;
        if (!ready[c.b]) blocked[c.a] = 1;
    }
    for (std::size_t i = 0; i < bodies_.size(); ++i) {
        if (!ready[i] || blocked[i]) continue;
        RigidBody& b = bodies_[i];
        b.asleep = true;
        b.linear_velocity.setZero();
        b.angular_velocity.setZero();
        update_caches(b);
    }
}

void World::step() {
    const int n = std::max(params_.substeps, 1);
    const double h = params_.timestep / n;
    const double inv_h = 1.0 / h;
    auto soften = [&](double hertz) {
        const double omega = 2.0 * kPi * hertz;
        const double a1 = 2.0 * params_.contact_damping_ratio + h * omega;
        const double a2 = h * omega * a1;
        const double a3 = 1.0 / (1.0 + a2);
        return Softness{omega / a1, a2 * a3, a3};
    };
    const double hertz = std::min(params_.contact_hertz, 0.25 * inv_h);
    soft_ = soften(hertz);
    static_soft_ = soften(2.0 * hertz);

    find_contacts();
    prepare_constraints();
    solver_.assign(bodies_.size(), SolverBody{});
    for (int i = 0; i < n; ++i) {
        integrate_velocities(h);
        warm_start();
        solve_contacts(inv_h, true);
        integrate_positions(h);
        solve_contacts(inv_h, false);
    }
    apply_restitution();

    next_cache_.clear();
    next_cache_.reserve(constraints_.size());
    for (auto& c : constraints_) {
        CachedManifold& out = next_cache_[pair_key(c.a, c.b)];
        out.count = c.count;
        for (int k = 0; k < c.count; ++k) {
            const ConstraintPoint& p = c.points[k];
            out.points[k] = {p.local_b, p.normal_impulse, p.tangent_impulse1 * c.tangent1 + p.tangent_impulse2 * c.tangent2};
        }
    }
    std::swap(cache_, next_cache_);

    for (auto& b : bodies_) {
        if (!b.asleep) update_caches(b);
    }
    update_sleep();
    ++steps_;
}

std::vector<std::size_t> World::unsupported(const std::vector<std::size_t>& candidates) const {
    std::vector<std::size_t> out;
    const double tol = params_.support_tolerance;
    for (std::size_t i : candidates) {
        const RigidBody& b = bodies_[i];
        double lowest = std::numeric_limits<double>::infinity();
        for (const auto& v : b.asset->collider->vertices()) lowest = std::min(lowest, (b.rotation * v + b.position).z());
        if (lowest <= tol) continue;
        const Aabb probe = b.bounds.inflated(tol);
        bool touching = false;
        for (std::size_t j = 0; j < bodies_.size() && !touching; ++j) {
            if (j == i || !probe.overlaps(bodies_[j].bounds)) continue;
            touching = separation(*b.asset->collider, b.pose(), *bodies_[j].asset->collider, bodies_[j].pose()) <= tol;
        }
        if (!touching) out.push_back(i);
    }
    return out;
}

double World::max_penetration() const {
    double worst = 0.0;
    std::vector<std::size_t> order(bodies_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return bodies_[a].bounds.lo.x() < bodies_[b].bounds.lo.x(); });
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        const RigidBody& a = bodies_[order[oi]];
        for (const auto& v : a.asset->collider->vertices()) worst = std::max(worst, -(a.rotation * v + a.position).z());
        for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
            const RigidBody& b = bodies_[order[oj]];
            if (b.bounds.lo.x() > a.bounds.hi.x()) break;
            if (!a.bounds.overlaps(b.bounds)) continue;
            worst = std::max(worst, -separation(*a.asset->collider, a.pose(), *b.asset->collider, b.pose()));
        }
    }
    return worst;
}

}  // namespace rubble
