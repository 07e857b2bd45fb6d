#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "rubble/error.hpp"
#include "rubble/math.hpp"

namespace rubble {

class CameraError : public Error {
public:
    using Error::Error;
};

inline constexpr int kImageSize = 1024;

struct Intrinsics {
    int width = kImageSize;
    int height = kImageSize;
    double fov_y_deg = 75.0;

    [[nodiscard]] double focal() const { return 0.5 * height / std::tan(0.5 * deg_to_rad(fov_y_deg)); }
    [[nodiscard]] double cx() const { return 0.5 * width; }
    [[nodiscard]] double cy() const { return 0.5 * height; }
};

/// Camera frame follows the computer-vision convention: +x right, +y down,
/// +z along the optical axis. `orientation` maps camera to world.
struct CameraState {
    Vec3 position = Vec3::Zero();
    Quat orientation = Quat::Identity();
    double axial_speed = 0.0;  // m/s along +z, may be negative
    Intrinsics intrinsics;

    [[nodiscard]] Vec3 forward() const { return orientation * Vec3::UnitZ(); }
    [[nodiscard]] Vec3 right() const { return orientation * Vec3::UnitX(); }
    [[nodiscard]] Vec3 down() const { return orientation * Vec3::UnitY(); }

    /// Throws CameraError on a non-unit quaternion or FOV outside (10, 170).
    void validate() const;
};

/// Orientation that looks from `eye` at `target` with world +z up.
Quat look_at(const Vec3& eye, const Vec3& target);

struct MotionCommand {
    double d_roll = 0.0;   // about the optical axis
    double d_pitch = 0.0;  // about +x; positive tilts the view up
    double d_yaw = 0.0;    // about -y; positive turns the view left
    double axial_speed = 0.0;
    std::optional<double> headlamp_intensity;
};

/// Yaw, then pitch, then roll about the camera's own axes, then translation
/// along the new optical axis. Throws CameraError on non-finite input or dt <= 0.
CameraState apply_command(const CameraState& state, const MotionCommand& cmd, double dt);

struct TrajectorySample {
    double t = 0.0;
    CameraState state;
};

struct Trajectory {
    double rate = 30.0;
    std::vector<TrajectorySample> samples;
};

struct Waypoint {
    std::optional<double> t;  // arrival time, s
    Vec3 position = Vec3::Zero();
    Vec3 look_at = Vec3::UnitX();
};

/// Piecewise-linear path through the waypoints, sampled at `rate`. Travel is
/// at constant `speed` unless every waypoint carries an arrival time.
/// Orientation slerps between the waypoints' look-at orientations.
Trajectory run_script(const std::vector<Waypoint>& waypoints, double rate = 30.0, double speed = 0.5,
                      const Intrinsics& intrinsics = {});

/// Lines of `px py pz lx ly lz` or `t px py pz lx ly lz`; `#` starts a comment.
std::vector<Waypoint> parse_waypoints(std::istream& in);
std::vector<Waypoint> load_waypoints(const std::string& path);

}  // namespace rubble
