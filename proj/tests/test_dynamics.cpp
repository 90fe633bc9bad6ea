#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>

#include "barkour/dynamics.hpp"

using namespace barkour;

namespace {

Terrain flat_terrain() {
  TerrainParams p;
  p.width = 10.0;
  p.depth = 10.0;
  return build_training_terrain(TerrainKind::kFlat, p, 0);
}

// Independent FK oracle: explicit homogeneous-transform chain
//   T = Trans(hip) * Rx(a) * RotYfwd(h) * Trans(0,0,-Lu) * RotYfwd(k) * Trans(0,0,-Ll)
// where RotYfwd(t) swings the distal link toward +x for positive t.
Eigen::Matrix4d trans(const Vec3& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 1>(0, 3) = t;
  return m;
}
Eigen::Matrix4d rot(const Mat3& r) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = r;
  return m;
}
Vec3 fk_oracle(const RobotModel& m, int leg, double a, double h, double k) {
  const Mat3 rx = Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix();
  const Mat3 ry_h = Eigen::AngleAxisd(-h, Vec3::UnitY()).toRotationMatrix();
  const Mat3 ry_k = Eigen::AngleAxisd(-k, Vec3::UnitY()).toRotationMatrix();
  Eigen::Matrix4d t = trans(m.hip_offset(leg)) * rot(rx) * rot(ry_h) *
                      trans({0, 0, -m.upper_len}) * rot(ry_k) * trans({0, 0, -m.lower_len});
  return t.block<3, 1>(0, 3);
}

}  // namespace

TEST_CASE("forward kinematics matches the homogeneous-transform oracle") {
  RobotModel m;
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    Vec12 q;
    for (int j = 0; j < kNumJoints; ++j)
      q[j] = rng.uniform(m.joint_lo[j], m.joint_hi[j]);
    const auto feet = forward_kinematics(m, Vec3::Zero(), Quat::Identity(), q);
    for (int leg = 0; leg < kNumLegs; ++leg) {
      const Vec3 want = fk_oracle(m, leg, q[3 * leg], q[3 * leg + 1], q[3 * leg + 2]);
      CHECK((feet[leg] - want).norm() < 1e-12);
    }
  }
}

TEST_CASE("forward kinematics anchor poses") {
  RobotModel m;
  // Fully extended leg straight down: foot 0.41 m below the hip.
  Vec12 q = Vec12::Zero();
  auto feet = forward_kinematics(m, Vec3::Zero(), Quat::Identity(), q);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Vec3 rel = feet[leg] - m.hip_offset(leg);
    CHECK(rel.x() == doctest::Approx(0.0));
    CHECK(rel.z() == doctest::Approx(-0.41));
  }
  // Default pose: all feet at ground level when the base sits at the
  // standing height.
  const double h = m.standing_height();
  CHECK(h == doctest::Approx(0.300).epsilon(1e-3));
  feet = forward_kinematics(m, {0, 0, h}, Quat::Identity(), m.q_default);
  for (int leg = 0; leg < kNumLegs; ++leg)
    CHECK(feet[leg].z() == doctest::Approx(0.0).epsilon(1e-9));
  // Knee at 90 degrees, hip straight down (planar values).
  Vec12 q2 = Vec12::Zero();
  q2[2] = -kPi / 2;
  feet = forward_kinematics(m, Vec3::Zero(), Quat::Identity(), q2);
  const Vec3 rel = feet[0] - m.hip_offset(0);
  CHECK(rel.x() == doctest::Approx(-0.19));
  CHECK(rel.z() == doctest::Approx(-0.22));
}

TEST_CASE("pd torque: zero error, proportional response, clipping") {
  RobotModel m;
  const Vec12 q = m.q_default;
  CHECK(pd_torque(m, q, q, Vec12::Zero()).norm() == doctest::Approx(0.0));

  Vec12 target = q;
  target[4] += 0.5;
  Vec12 tau = pd_torque(m, target, q, Vec12::Zero());
  CHECK(tau[4] == doctest::Approx(10.0));

  target[4] = q[4] + 1.0;
  tau = pd_torque(m, target, q, Vec12::Zero());
  CHECK(tau[4] == doctest::Approx(12.0));  // clipped at the torque limit

  target[4] = q[4] - 3.0;
  tau = pd_torque(m, target, q, Vec12::Zero());
  CHECK(tau[4] == doctest::Approx(-12.0));
}

TEST_CASE("contact: separation, static normal force, cone clamp") {
  Terrain t = flat_terrain();
  SimConfig cfg;
  FootContact fc;

  // Above ground: no force, no flag.
  auto r = contact_force(t, cfg, {1, 1, 0.05}, Vec3::Zero(), fc);
  CHECK(!r.active);
  CHECK(r.force.norm() == 0.0);

  // Static penetration delta with zero velocity: normal force k_n * delta.
  const double delta = 0.003;
  r = contact_force(t, cfg, {1, 1, -delta}, Vec3::Zero(), fc);
  CHECK(r.active);
  CHECK(r.force.z() == doctest::Approx(cfg.contact_stiffness * delta));
  CHECK(r.force.head<2>().norm() == doctest::Approx(0.0));

  // Tangential demand of 2 mu fn returns exactly mu fn.
  const double fn = cfg.contact_stiffness * delta;
  const double mu = t.friction_at(1, 1) * cfg.friction_scale;
  const double want_ft = mu * fn;
  const double dx = 2.0 * want_ft / cfg.contact_stiffness;
  r = contact_force(t, cfg, {1 + dx, 1, -delta}, Vec3::Zero(), fc);
  CHECK(r.active);
  CHECK(r.force.head<2>().norm() == doctest::Approx(want_ft).epsilon(1e-9));
}

TEST_CASE("free fall follows the closed form within 1e-6 m over 0.1 s") {
  RobotModel m;
  Terrain t = flat_terrain();
  SimConfig cfg;
  Rng rng(0);
  RobotState s = reset(m, t, {.x = 5, .y = 5}, rng);
  s.p.z() = 5.0;  // re-spawn high in the air
  s.feet_prev_valid = false;
  const double z0 = s.p.z();
  for (int i = 0; i < 5; ++i) step(s, Vec12::Zero(), m, t, cfg);
  const double tt = 0.1;
  CHECK(std::abs(s.p.z() - (z0 - 0.5 * kGravity * tt * tt)) < 1e-6);
  CHECK(s.v.z() == doctest::Approx(-kGravity * tt).epsilon(1e-12));
}

TEST_CASE("without contact, momentum changes only by gravity") {
  RobotModel m;
  Terrain t = flat_terrain();
  SimConfig cfg;
  Rng rng(0);
  RobotState s = reset(m, t, {.x = 5, .y = 5}, rng);
  s.p.z() = 4.0;
  s.v = {0.3, -0.2, 0.1};
  s.feet_prev_valid = false;
  const Vec3 p0 = m.torso_mass * s.v;
  step(s, Vec12::Zero(), m, t, cfg);
  const Vec3 p1 = m.torso_mass * s.v;
  const Vec3 want = p0 + m.torso_mass * Vec3(0, 0, -kGravity) * cfg.control_dt;
  CHECK((p1 - want).norm() < 1e-6);
}

TEST_CASE("standing settle: comes to rest near the spawn height") {
  RobotModel m;
  Terrain t = flat_terrain();
  SimConfig cfg;
  Rng rng(0);
  RobotState s = reset(m, t, {.x = 5, .y = 5}, rng);
  const double z0 = s.p.z();
  CHECK(z0 == doctest::Approx(m.standing_height() + 0.001).epsilon(1e-6));
  for (int i = 0; i < 50; ++i) step(s, Vec12::Zero(), m, t, cfg);
  CHECK(s.v.norm() < 0.01);
  CHECK(std::abs(s.p.z() - z0) < 0.005);
  for (int leg = 0; leg < kNumLegs; ++leg) CHECK(s.foot_contact[leg]);
}

TEST_CASE("step is deterministic") {
  RobotModel m;
  Terrain t = flat_terrain();
  SimConfig cfg;
  Rng rng(0);
  RobotState a = reset(m, t, {.x = 5, .y = 5}, rng);
  RobotState b = a;
  Vec12 act;
  for (int j = 0; j < kNumJoints; ++j) act[j] = 0.3 * std::sin(j);
  for (int i = 0; i < 10; ++i) {
    step(a, act, m, t, cfg);
    step(b, act, m, t, cfg);
  }
  CHECK(a.p == b.p);
  CHECK(a.v == b.v);
  CHECK(a.q == b.q);
  CHECK(a.orientation.coeffs() == b.orientation.coeffs());
}

TEST_CASE("friction cone and non-negative normals over random substeps") {
  RobotModel m;
  Terrain t = flat_terrain();
  SimConfig cfg;
  Rng rng(7);
  FootContact fc;
  for (int i = 0; i < 20000; ++i) {
    const Vec3 pos(rng.uniform(0.5, 9.5), rng.uniform(0.5, 9.5), rng.uniform(-0.02, 0.02));
    const Vec3 vel(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    auto r = contact_force(t, cfg, pos, vel, fc);
    const Vec3 n = t.normal_at(pos.x(), pos.y());
    const double fn = r.force.dot(n);
    CHECK(fn >= -1e-12);
    const double mu = t.friction_at(pos.x(), pos.y()) * cfg.friction_scale;
    const double ft = (r.force - fn * n).norm();
    CHECK(ft <= mu * fn + 1e-9);
  }
}

TEST_CASE("applied torques never exceed the (possibly overridden) limit") {
  RobotModel m;
  Terrain t = flat_terrain();
  SimConfig cfg;
  Rng rng(3);
  RobotState s = reset(m, t, {.x = 5, .y = 5}, rng);
  StepExtras extras;
  extras.torque_limit_override = 9.0;
  Vec12 act;
  for (int i = 0; i < 25; ++i) {
    for (int j = 0; j < kNumJoints; ++j) act[j] = rng.uniform(-1, 1);
    step(s, act, m, t, cfg, extras);
    CHECK(s.tau_applied.cwiseAbs().maxCoeff() <= 9.0 + 1e-12);
  }
}

TEST_CASE("quaternion stays unit-norm") {
  RobotModel m;
  Terrain t = flat_terrain();
  SimConfig cfg;
  Rng rng(5);
  RobotState s = reset(m, t, {.x = 5, .y = 5}, rng);
  s.omega = {1.0, -2.0, 0.5};
  Vec12 act;
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < kNumJoints; ++j) act[j] = rng.uniform(-1, 1);
    step(s, act, m, t, cfg);
    CHECK(std::abs(s.orientation.norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("reset: spawn on a table top, determinism, jitter bounds") {
  RobotModel m;
  auto [course, terrain] = build_barkour_course(CourseLayout::barkour_default());
  const auto& start = course.obstacles.front();
  Rng rng(1);
  RobotState s = reset(m, terrain, {.x = start.x, .y = start.y}, rng);
  CHECK(s.p.z() == doctest::Approx(kTableHeight + m.standing_height() + 0.001).epsilon(1e-6));

  Rng r1(9), r2(9);
  RobotState a = reset(m, terrain, {.x = start.x, .y = start.y, .q_jitter = 0.05}, r1);
  RobotState b = reset(m, terrain, {.x = start.x, .y = start.y, .q_jitter = 0.05}, r2);
  CHECK(a.q == b.q);
  for (int j = 0; j < kNumJoints; ++j)
    CHECK(std::abs(a.q[j] - m.q_default[j]) <= 0.05 + 1e-12);
}

TEST_CASE("simulation blow-up reports a terminal fault") {
  RobotModel m;
  Terrain t = flat_terrain();
  SimConfig cfg;
  Rng rng(0);
  RobotState s = reset(m, t, {.x = 5, .y = 5}, rng);
  s.v = Vec3(std::nan(""), 0, 0);
  CHECK_THROWS_AS(step(s, Vec12::Zero(), m, t, cfg), SimulationFault);
}
