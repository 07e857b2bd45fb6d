#include <gtest/gtest.h>

#include <limits>
#include <sstream>

#include "rubble/camera.hpp"
#include "rubble/rng.hpp"

using namespace rubble;

namespace {

CameraState start() {
    CameraState c;
    c.position = Vec3(1, 2, 3);
    c.orientation = look_at(c.position, Vec3(4, 6, 3));
    return c;
}

Mat3 rot_about(const Vec3& axis, double angle) { return Eigen::AngleAxisd(angle, axis).toRotationMatrix(); }

}  // namespace

TEST(Camera, LookAtConvention) {
    const CameraState c = start();
    EXPECT_NEAR((c.forward() - Vec3(0.6, 0.8, 0)).norm(), 0.0, 1e-12);
    EXPECT_NEAR(c.down().z(), -1.0, 1e-12);  // image +y points to world -z
    EXPECT_NEAR(c.right().dot(c.forward()), 0.0, 1e-12);
    const Quat straight_down = look_at(Vec3(0, 0, 5), Vec3(0, 0, 0));
    EXPECT_NEAR((straight_down * Vec3::UnitZ() - Vec3(0, 0, -1)).norm(), 0.0, 1e-12);
}

TEST(Camera, IntrinsicsDefaults) {
    const Intrinsics k;
    EXPECT_EQ(k.width, 1024);
    EXPECT_EQ(k.height, 1024);
    EXPECT_DOUBLE_EQ(k.fov_y_deg, 75.0);
    EXPECT_NEAR(k.focal(), 512.0 / std::tan(deg_to_rad(37.5)), 1e-9);
    CameraState c;
    c.intrinsics.fov_y_deg = 175;
    EXPECT_THROW(c.validate(), CameraError);
}

TEST(Camera, ForwardTranslation) {
    const CameraState s = start();
    MotionCommand cmd;
    cmd.axial_speed = 1.0;
    const CameraState n = apply_command(s, cmd, 1.0);
    EXPECT_NEAR((n.position - s.position - s.forward()).norm(), 0.0, 1e-12);
    EXPECT_NEAR((n.position - s.position).norm(), 1.0, 1e-12);
}

TEST(Camera, HalfTurnReverses) {
    const CameraState s = start();
    MotionCommand turn;
    turn.d_yaw = kPi;
    MotionCommand go;
    go.axial_speed = 1.0;
    const CameraState n = apply_command(apply_command(s, turn, 0.1), go, 1.0);
    EXPECT_NEAR((n.position - s.position + s.forward()).norm(), 0.0, 1e-9);
}

TEST(Camera, FourQuarterTurns) {
    const CameraState s = start();
    MotionCommand q;
    q.d_yaw = kPi / 2;
    CameraState c = s;
    Mat3 oracle = s.orientation.toRotationMatrix();
    for (int i = 0; i < 4; ++i) {
        c = apply_command(c, q, 0.1);
        oracle = oracle * rot_about(-Vec3::UnitY(), kPi / 2);
        EXPECT_NEAR((c.orientation.toRotationMatrix() - oracle).norm(), 0.0, 1e-9);
    }
    EXPECT_LT(quat_distance(c.orientation, s.orientation), 1e-6);
}

TEST(Camera, YawPitchRollOrder) {
    const CameraState s = start();
    MotionCommand cmd;
    cmd.d_yaw = 0.3;
    cmd.d_pitch = -0.2;
    cmd.d_roll = 0.7;
    const CameraState n = apply_command(s, cmd, 0.05);
    const Mat3 oracle = s.orientation.toRotationMatrix() * rot_about(-Vec3::UnitY(), 0.3) *
                        rot_about(Vec3::UnitX(), -0.2) * rot_about(Vec3::UnitZ(), 0.7);
    EXPECT_NEAR((n.orientation.toRotationMatrix() - oracle).norm(), 0.0, 1e-12);
    // Positive yaw turns the view left, positive pitch tilts it up.
    MotionCommand left;
    left.d_yaw = 0.1;
    EXPECT_LT(apply_command(s, left, 0.1).forward().dot(s.right()), 0.0);
    MotionCommand up;
    up.d_pitch = 0.1;
    EXPECT_GT(apply_command(s, up, 0.1).forward().z(), 0.0);
}

TEST(Camera, ZeroCommandIsIdentity) {
    const CameraState s = start();
    const CameraState n = apply_command(s, MotionCommand{}, 0.1);
    EXPECT_EQ(n.position, s.position);
    EXPECT_LT(quat_distance(n.orientation, s.orientation), 1e-15);
}

TEST(Camera, UnitQuaternionAfterLongSequence) {
    Rng rng(3);
    CameraState c = start();
    for (int i = 0; i < 10000; ++i) {
        MotionCommand m;
        m.d_roll = rng.uniform(-1, 1);
        m.d_pitch = rng.uniform(-1, 1);
        m.d_yaw = rng.uniform(-1, 1);
        m.axial_speed = rng.uniform(-1, 1);
        c = apply_command(c, m, 1.0 / 30);
        ASSERT_NEAR(c.orientation.norm(), 1.0, 1e-12);
    }
}

TEST(Camera, RejectsBadCommands) {
    MotionCommand m;
    m.d_yaw = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(apply_command(start(), m, 0.1), CameraError);
    EXPECT_THROW(apply_command(start(), MotionCommand{}, 0.0), CameraError);
    MotionCommand inf;
    inf.axial_speed = std::numeric_limits<double>::infinity();
    EXPECT_THROW(apply_command(start(), inf, 0.1), CameraError);
}

TEST(Script, SampleCount) {
    const auto t = run_script({{std::nullopt, Vec3(0, 0, 1), Vec3(10, 0, 1)}, {std::nullopt, Vec3(3, 0, 1), Vec3(10, 0, 1)}},
                              30.0, 1.0);
    ASSERT_EQ(t.samples.size(), 91u);
    EXPECT_DOUBLE_EQ(t.samples.front().t, 0.0);
    EXPECT_NEAR(t.samples.back().t, 3.0, 1e-12);
    EXPECT_NEAR((t.samples.back().state.position - Vec3(3, 0, 1)).norm(), 0.0, 1e-9);
    for (std::size_t i = 0; i < t.samples.size(); ++i) EXPECT_NEAR(t.samples[i].t, i / 30.0, 1e-9);
}

TEST(Script, ParallelLookAtsKeepOrientation) {
    const Vec3 dir(1, 1, 0);
    const auto t = run_script({{std::nullopt, Vec3(0, 0, 1), Vec3(0, 0, 1) + dir},
                               {std::nullopt, Vec3(2, -1, 1), Vec3(2, -1, 1) + dir},
                               {std::nullopt, Vec3(2, 1, 1), Vec3(2, 1, 1) + dir}},
                              30.0, 0.7);
    for (const auto& s : t.samples) EXPECT_LT(quat_distance(s.state.orientation, t.samples[0].state.orientation), 1e-9);
}

TEST(Script, PositionsOnSegment) {
    const Vec3 a(0.5, -1, 0.3), b(2.5, 3, 1.3);
    const auto t = run_script({{std::nullopt, a, Vec3(5, 5, 0)}, {std::nullopt, b, Vec3(-5, 5, 2)}}, 30.0, 0.4);
    const Vec3 d = (b - a).normalized();
    for (const auto& s : t.samples) {
        const Vec3 p = s.state.position - a;
        const double along = p.dot(d);
        EXPECT_NEAR((p - along * d).norm(), 0.0, 1e-9);
        EXPECT_GE(along, -1e-9);
        EXPECT_LE(along, (b - a).norm() + 1e-9);
        EXPECT_NEAR(s.state.orientation.norm(), 1.0, 1e-12);
    }
}

TEST(Script, TimedWaypoints) {
    const auto t = run_script({{0.0, Vec3(0, 0, 1), Vec3(1, 0, 1)}, {2.0, Vec3(1, 0, 1), Vec3(2, 0, 1)}}, 10.0, 99.0);
    ASSERT_EQ(t.samples.size(), 21u);
    EXPECT_NEAR(t.samples[10].state.position.x(), 0.5, 1e-12);
}

TEST(Script, Errors) {
    EXPECT_THROW(run_script({{std::nullopt, Vec3(0, 0, 1), Vec3(1, 0, 1)}}), CameraError);
    EXPECT_THROW(run_script({{std::nullopt, Vec3(0, 0, 1), Vec3(1, 0, 1)}, {std::nullopt, Vec3(0, 0, 1), Vec3(2, 0, 1)}}),
                 CameraError);
}

TEST(Script, ParseWaypoints) {
    std::istringstream in("# path\n0 0 1  5 0 1\n\n3 0 1 5 0 1 # end\n");
    const auto w = parse_waypoints(in);
    ASSERT_EQ(w.size(), 2u);
    EXPECT_FALSE(w[0].t.has_value());
    EXPECT_EQ(w[1].position, Vec3(3, 0, 1));
    std::istringstream timed("0 0 0 1 5 0 1\n1.5 3 0 1 5 0 1\n");
    const auto tw = parse_waypoints(timed);
    ASSERT_TRUE(tw[1].t.has_value());
    EXPECT_DOUBLE_EQ(*tw[1].t, 1.5);
    std::istringstream bad("0 0 1 5 0\n");
    EXPECT_THROW(parse_waypoints(bad), CameraError);
}
