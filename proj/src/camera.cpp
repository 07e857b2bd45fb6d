#include "rubble/camera.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace rubble {

void CameraState::validate() const {
    if (!position.allFinite() || !orientation.coeffs().allFinite()) throw CameraError("camera state is not finite");
    if (std::abs(orientation.norm() - 1.0) > 1e-6) throw CameraError("camera orientation is not a unit quaternion");
    if (!(intrinsics.fov_y_deg > 10.0 && intrinsics.fov_y_deg < 170.0)) {
        throw CameraError("vertical field of view must lie in (10, 170) degrees");
    }
    if (intrinsics.width != kImageSize || intrinsics.height != kImageSize) throw CameraError("image must be 1024x1024");
}

Quat look_at(const Vec3& eye, const Vec3& target) {
    const Vec3 z = (target - eye).normalized();
    Vec3 up = Vec3::UnitZ();
    if (std::abs(z.dot(up)) > 1.0 - 1e-9) up = Vec3::UnitY();
    const Vec3 x = z.cross(up).normalized();
    const Vec3 y = z.cross(x);
    Mat3 r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    return Quat(r).normalized();
}

CameraState apply_command(const CameraState& state, const MotionCommand& cmd, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw CameraError("dt must be finite and > 0");
    if (!std::isfinite(cmd.d_roll) || !std::isfinite(cmd.d_pitch) || !std::isfinite(cmd.d_yaw) ||
        !std::isfinite(cmd.axial_speed) || (cmd.headlamp_intensity && !std::isfinite(*cmd.headlamp_intensity))) {
        throw CameraError("motion command is not finite");
    }
    CameraState next = state;
    const Quat yaw = axis_angle(-Vec3::UnitY(), cmd.d_yaw);
    const Quat pitch = axis_angle(Vec3::UnitX(), cmd.d_pitch);
    const Quat roll = axis_angle(Vec3::UnitZ(), cmd.d_roll);
    next.orientation = (state.orientation * yaw * pitch * roll).normalized();
    next.axial_speed = cmd.axial_speed;
    next.position = state.position + next.forward() * (cmd.axial_speed * dt);
    return next;
}

Trajectory run_script(const std::vector<Waypoint>& waypoints, double rate, double speed, const Intrinsics& intrinsics) {
    if (waypoints.size() < 2) throw CameraError("a scripted trajectory needs at least 2 waypoints");
    if (!(rate > 0.0)) throw CameraError("sample rate must be > 0");
    bool timed = true;
    for (const auto& w : waypoints) timed = timed && w.t.has_value();
    if (!timed && !(speed > 0.0)) throw CameraError("speed must be > 0");

    const std::size_t n = waypoints.size();
    std::vector<double> arrival(n, 0.0);
    std::vector<Quat> facing(n);
    for (std::size_t i = 0; i < n; ++i) {
        if ((waypoints[i].look_at - waypoints[i].position).norm() < 1e-9) {
            throw CameraError("waypoint " + std::to_string(i) + " looks at its own position");
        }
        facing[i] = look_at(waypoints[i].position, waypoints[i].look_at);
        if (i == 0) continue;
        const double len = (waypoints[i].position - waypoints[i - 1].position).norm();
        if (len < 1e-9) throw CameraError("waypoints " + std::to_string(i - 1) + " and " + std::to_string(i) + " coincide");
        if (timed) {
            arrival[i] = *waypoints[i].t - *waypoints[0].t;
            if (!(arrival[i] > arrival[i - 1])) throw CameraError("waypoint times must increase");
        } else {
            arrival[i] = arrival[i - 1] + len / speed;
        }
    }

    Trajectory traj;
    traj.rate = rate;
    const double total = arrival.back();
    const auto count = static_cast<std::size_t>(std::floor(total * rate + 1e-9)) + 1;
    traj.samples.reserve(count);
    std::size_t seg = 1;
    for (std::size_t k = 0; k < count; ++k) {
        const double t = static_cast<double>(k) / rate;
        while (seg < n - 1 && t > arrival[seg]) ++seg;
        const double span = arrival[seg] - arrival[seg - 1];
        const double u = std::clamp((t - arrival[seg - 1]) / span, 0.0, 1.0);
        TrajectorySample s;
        s.t = t;
        s.state.intrinsics = intrinsics;
        s.state.position = waypoints[seg - 1].position + u * (waypoints[seg].position - waypoints[seg - 1].position);
        s.state.orientation = facing[seg - 1].slerp(u, facing[seg]).normalized();
        s.state.axial_speed = (waypoints[seg].position - waypoints[seg - 1].position).norm() / span;
        traj.samples.push_back(s);
    }
    return traj;
}

std::vector<Waypoint> parse_waypoints(std::istream& in) {
    std::vector<Waypoint> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::vector<double> v;
        double x;
        while (ss >> x) v.push_back(x);
        if (!ss.eof()) throw CameraError("waypoints line " + std::to_string(lineno) + ": not a number");
        if (v.empty()) continue;
        Waypoint w;
        std::size_t o = 0;
        if (v.size() == 7) {
            w.t = v[0];
            o = 1;
        } else if (v.size() != 6) {
            throw CameraError("waypoints line " + std::to_string(lineno) + ": expected 6 or 7 values");
        }
        w.position = Vec3(v[o], v[o + 1], v[o + 2]);
        w.look_at = Vec3(v[o + 3], v[o + 4], v[o + 5]);
        out.push_back(w);
    }
    return out;
}

std::vector<Waypoint> load_waypoints(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open waypoint file " + path);
    return parse_waypoints(in);
}

}  // namespace rubble
