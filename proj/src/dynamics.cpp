#include "barkour/dynamics.hpp"

#include <cmath>

namespace barkour {

Vec12 RobotModel::default_pose() {
  // (abduction, hip, knee) per leg; hip 0.75 / knee -1.5 puts the foot almost
  // directly under the hip at a 0.300 m standing height.
  Vec12 q;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    q[3 * leg + 0] = 0.0;
    q[3 * leg + 1] = 0.75;
    q[3 * leg + 2] = -1.5;
  }
  return q;
}

Vec12 RobotModel::joint_limits_lo() {
  Vec12 lo;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    lo[3 * leg + 0] = -0.8;
    lo[3 * leg + 1] = -1.6;
    lo[3 * leg + 2] = -2.6;
  }
  return lo;
}

Vec12 RobotModel::joint_limits_hi() {
  Vec12 hi;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    hi[3 * leg + 0] = 0.8;
    hi[3 * leg + 1] = 2.0;
    hi[3 * leg + 2] = -0.6;
  }
  return hi;
}

Vec3 RobotModel::hip_offset(int leg) const {
  const double sx = leg < 2 ? 1.0 : -1.0;   // FL FR HL HR
  const double sy = leg % 2 == 0 ? 1.0 : -1.0;
  return {sx * hip_x, sy * hip_y, 0.0};
}

double RobotModel::standing_height() const {
  const double h = q_default[1], k = q_default[2];
  return upper_len * std::cos(h) + lower_len * std::cos(h + k);
}

namespace {

// Foot position in the body frame for one leg's (abduction, hip, knee).
Vec3 foot_in_body(const RobotModel& m, int leg, double a, double h, double k) {
  const double px = m.upper_len * std::sin(h) + m.lower_len * std::sin(h + k);
  const double pz = -(m.upper_len * std::cos(h) + m.lower_len * std::cos(h + k));
  const double ca = std::cos(a), sa = std::sin(a);
  return m.hip_offset(leg) + Vec3(px, -pz * sa, pz * ca);
}

Vec3 knee_in_body(const RobotModel& m, int leg, double a, double h) {
  const double px = m.upper_len * std::sin(h);
  const double pz = -m.upper_len * std::cos(h);
  const double ca = std::cos(a), sa = std::sin(a);
  return m.hip_offset(leg) + Vec3(px, -pz * sa, pz * ca);
}

}  // namespace

std::array<Vec3, kNumLegs> forward_kinematics(const RobotModel& model, const Vec3& base_p,
                                              const Quat& base_q, const Vec12& q) {
  std::array<Vec3, kNumLegs> out;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Vec3 local = foot_in_body(model, leg, q[3 * leg], q[3 * leg + 1], q[3 * leg + 2]);
    out[leg] = base_p + base_q * local;
  }
  return out;
}

std::array<Vec3, kNumLegs> knee_positions(const RobotModel& model, const Vec3& base_p,
                                          const Quat& base_q, const Vec12& q) {
  std::array<Vec3, kNumLegs> out;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Vec3 local = knee_in_body(model, leg, q[3 * leg], q[3 * leg + 1]);
    out[leg] = base_p + base_q * local;
  }
  return out;
}

Vec12 pd_torque(const RobotModel& model, const Vec12& q_target, const Vec12& q,
                const Vec12& qd, double torque_limit_override) {
  const double lim = torque_limit_override > 0 ? torque_limit_override : model.torque_limit;
  Vec12 tau;
  for (int j = 0; j < kNumJoints; ++j)
    tau[j] = clamp(model.kp * (q_target[j] - q[j]) - model.kd * qd[j], -lim, lim);
  return tau;
}

ContactResult contact_force(const Terrain& terrain, const SimConfig& config,
                            const Vec3& foot_pos, const Vec3& foot_vel,
                            FootContact& contact) {
  ContactResult res;
  const double ground = terrain.height_at_clamped(foot_pos.x(), foot_pos.y());
  const double pen_v = ground - foot_pos.z();
  if (pen_v <= 0) {
    contact.active = false;
    return res;
  }
  const Vec3 n = terrain.normal_at(foot_pos.x(), foot_pos.y());
  const double depth = pen_v * n.z();  // perpendicular depth for planar patches
  const double vn = foot_vel.dot(n);
  const double fn = std::max(0.0, config.contact_stiffness * depth - config.contact_damping * vn);
  if (fn <= 0) {
    contact.active = false;
    return res;
  }

  if (!contact.active) {
    contact.active = true;
    contact.anchor = foot_pos;
  }
  const double mu = terrain.friction_at(foot_pos.x(), foot_pos.y()) * config.friction_scale;
  Vec3 disp = foot_pos - contact.anchor;
  disp -= disp.dot(n) * n;
  Vec3 vt = foot_vel - vn * n;
  Vec3 ft = -config.contact_stiffness * disp - config.contact_damping * vt;
  const double ft_max = mu * fn;
  if (ft.norm() > ft_max) {
    ft *= ft_max / ft.norm();
    // Slide the anchor so the spring term is consistent with the clamped force.
    Vec3 disp_new = -(ft + config.contact_damping * vt) / config.contact_stiffness;
    disp_new -= disp_new.dot(n) * n;
    contact.anchor = foot_pos - disp_new;
  }
  res.force = fn * n + ft;
  res.active = true;
  return res;
}

void step(RobotState& state, const Vec12& action, const RobotModel& model,
          const Terrain& terrain, const SimConfig& config, const StepExtras& extras) {
  const int n = config.substeps();
  const double dt = config.physics_dt;

  Vec12 a = action;
  for (int j = 0; j < kNumJoints; ++j) a[j] = clamp(a[j], -1.0, 1.0);
  Vec12 q_target = model.q_default + model.action_scale * a;
  for (int j = 0; j < kNumJoints; ++j)
    q_target[j] = clamp(q_target[j], model.joint_lo[j], model.joint_hi[j]);

  const Vec12 qd_before = state.qd;
  state.v += extras.velocity_kick;

  if (!state.feet_prev_valid) {
    state.foot_prev = forward_kinematics(model, state.p, state.orientation, state.q);
    state.feet_prev_valid = true;
  }

  for (int sub = 0; sub < n; ++sub) {
    // Joint servo: massless legs, first-order response bounded by the PD
    // torque through a viscous coefficient, with a static-friction deadband.
    Vec12 tau = pd_torque(model, q_target, state.q, state.qd, extras.torque_limit_override);
    const double sf = model.joint_static_friction;
    for (int j = 0; j < kNumJoints; ++j) {
      double t = tau[j];
      if (sf > 0) {
        if (std::abs(state.qd[j]) < 1e-3 && std::abs(t) <= sf) t = 0;
        else if (t > 0) t = std::max(0.0, t - sf);
        else t = std::min(0.0, t + sf);
      }
      state.qd[j] = t / model.joint_viscosity;
      state.q[j] += state.qd[j] * dt;
      if (state.q[j] < model.joint_lo[j]) {
        state.q[j] = model.joint_lo[j];
        if (state.qd[j] < 0) state.qd[j] = 0;
      } else if (state.q[j] > model.joint_hi[j]) {
        state.q[j] = model.joint_hi[j];
        if (state.qd[j] > 0) state.qd[j] = 0;
      }
    }
    state.tau_applied = tau;

    const auto feet = forward_kinematics(model, state.p, state.orientation, state.q);

    Vec3 force(0, 0, -model.torso_mass * kGravity);
    Vec3 torque = Vec3::Zero();
    for (int leg = 0; leg < kNumLegs; ++leg) {
      const Vec3 foot_vel = (feet[leg] - state.foot_prev[leg]) / dt;
      ContactResult c = contact_force(terrain, config, feet[leg], foot_vel, state.contact[leg]);
      state.foot_contact[leg] = c.active;
      if (c.active) {
        force += c.force;
        torque += (feet[leg] - state.p).cross(c.force);
      }
      state.foot_prev[leg] = feet[leg];
    }

    const Mat3 rot = state.orientation.toRotationMatrix();
    const Mat3 inertia_w = rot * model.torso_inertia * rot.transpose();
    const Vec3 accel = force / model.torso_mass;
    const Vec3 ang_accel = inertia_w.ldlt().solve(torque - state.omega.cross(inertia_w * state.omega));

    const Vec3 v_old = state.v;
    const Vec3 w_old = state.omega;
    state.v += accel * dt;
    state.omega += ang_accel * dt;
    // Trapezoidal position update keeps ballistic motion exact.
    state.p += 0.5 * (v_old + state.v) * dt;
    state.orientation = integrate_quat(state.orientation, 0.5 * (w_old + state.omega), dt);
    state.time += dt;
  }

  state.qdd = (state.qd - qd_before) / config.control_dt;

  const auto feet = forward_kinematics(model, state.p, state.orientation, state.q);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const double ground = terrain.height_at_clamped(feet[leg].x(), feet[leg].y());
    state.foot_height[leg] = std::max(feet[leg].z() - ground, -1.0);
  }

  if (!state.p.allFinite() || !state.v.allFinite() || !state.q.allFinite() ||
      !state.omega.allFinite() || !std::isfinite(state.orientation.norm()))
    throw SimulationFault("simulation state is non-finite");
}

RobotState reset(const RobotModel& model, const Terrain& terrain, const InitSpec& spec,
                 Rng& rng) {
  RobotState s;
  s.q = model.q_default;
  double yaw = spec.yaw;
  if (spec.yaw_jitter > 0) yaw += rng.uniform(-spec.yaw_jitter, spec.yaw_jitter);
  if (spec.q_jitter > 0)
    for (int j = 0; j < kNumJoints; ++j)
      s.q[j] = clamp(s.q[j] + rng.uniform(-spec.q_jitter, spec.q_jitter),
                     model.joint_lo[j], model.joint_hi[j]);
  s.orientation = Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
  s.p = {spec.x, spec.y, 0.0};

  // Feet resolve onto (just above) the terrain.
  const auto feet0 = forward_kinematics(model, s.p, s.orientation, s.q);
  double z = -1e18;
  for (const auto& f : feet0)
    z = std::max(z, terrain.height_at_clamped(f.x(), f.y()) - f.z());
  s.p.z() = z + spec.z_offset;

  const double torso_ground = terrain.height_at_clamped(s.p.x(), s.p.y());
  if (s.p.z() < torso_ground + 0.05)
    throw std::invalid_argument("spawn pose intersects the terrain");

  const auto feet = forward_kinematics(model, s.p, s.orientation, s.q);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    s.foot_prev[leg] = feet[leg];
    s.foot_height[leg] =
        feet[leg].z() - terrain.height_at_clamped(feet[leg].x(), feet[leg].y());
  }
  s.feet_prev_valid = true;
  return s;
}

bool board_contact(const RobotModel& model, const Terrain& terrain, const RobotState& state) {
  if (terrain.board_mask.empty()) return false;
  const auto feet = forward_kinematics(model, state.p, state.orientation, state.q);
  for (int leg = 0; leg < kNumLegs; ++leg)
    if (state.foot_contact[leg] && terrain.board_at(feet[leg].x(), feet[leg].y()))
      return true;
  const auto knees = knee_positions(model, state.p, state.orientation, state.q);
  for (const auto& k : knees) {
    if (!terrain.board_at(k.x(), k.y())) continue;
    if (k.z() - terrain.height_at_clamped(k.x(), k.y()) < 0.02) return true;
  }
  // Torso belly scraping the board.
  if (terrain.board_at(state.p.x(), state.p.y()) &&
      state.p.z() - terrain.height_at_clamped(state.p.x(), state.p.y()) < 0.08)
    return true;
  return false;
}

std::optional<double> min_knee_height_over_gap(const RobotModel& model, const Terrain& terrain,
                                               const RobotState& state) {
  if (terrain.gap_mask.empty()) return std::nullopt;
  const auto knees = knee_positions(model, state.p, state.orientation, state.q);
  std::optional<double> best;
  for (const auto& k : knees) {
    if (!terrain.gap_at(k.x(), k.y())) continue;
    // Height over the nominal floor (z = 0), not the pit bottom.
    const double h = k.z();
    if (!best || h < *best) best = h;
  }
  return best;
}

}  // namespace barkour
