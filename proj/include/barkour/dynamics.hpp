#pragma once

#include <array>
#include <optional>

#include "barkour/common.hpp"
#include "barkour/terrain.hpp"

namespace barkour {

inline constexpr int kNumLegs = 4;
inline constexpr int kNumJoints = 12;  // (abduction, hip, knee) x FL FR HL HR

/// Physical description of the quadruped. Legs are massless 3-DoF chains
/// (abduction about x, hip and knee about y) hanging off a rigid torso.
struct RobotModel {
  double torso_mass = 11.5;  // kg
  Mat3 torso_inertia = (Eigen::Vector3d(0.094, 0.152, 0.219)).asDiagonal();
  double hip_x = 0.19;   // half of the 380 mm front-to-back hip spacing
  double hip_y = 0.145;  // half of the 290 mm left-right spacing
  double upper_len = 0.22;
  double lower_len = 0.19;
  Vec12 q_default = default_pose();
  Vec12 joint_lo = joint_limits_lo();
  Vec12 joint_hi = joint_limits_hi();
  double torque_limit = 12.0;  // N*m per joint
  double kp = 20.0;            // N*m/rad
  double kd = 0.5;             // N*m*s/rad
  double joint_viscosity = 0.5;       // N*m*s/rad, bounds the joint slew rate
  double joint_static_friction = 0.0; // N*m, Coulomb deadband (randomized)
  double action_scale = 0.5;          // rad per unit action

  static Vec12 default_pose();
  static Vec12 joint_limits_lo();
  static Vec12 joint_limits_hi();

  Vec3 hip_offset(int leg) const;
  /// Vertical hip-to-foot drop at the default pose (~0.30 m standing height).
  double standing_height() const;
};

struct SimConfig {
  double physics_dt = 0.001;  // 1 kHz inner loop
  double control_dt = 0.02;   // 50 Hz position commands
  double contact_stiffness = 1e4;   // N/m
  double contact_damping = 100.0;   // N*s/m
  double friction_scale = 1.0;      // multiplies the terrain friction map

  int substeps() const {
    const int n = static_cast<int>(std::round(control_dt / physics_dt));
    if (std::abs(n * physics_dt - control_dt) > 1e-12)
      throw std::invalid_argument("control_dt must be an integer multiple of physics_dt");
    return n;
  }
};

struct FootContact {
  bool active = false;
  Vec3 anchor = Vec3::Zero();  // tangential stick point, world frame
};

struct RobotState {
  Vec3 p = Vec3::Zero();           // base position, world
  Quat orientation = Quat::Identity();
  Vec3 v = Vec3::Zero();           // base linear velocity, world
  Vec3 omega = Vec3::Zero();       // base angular velocity, world
  Vec12 q = Vec12::Zero();
  Vec12 qd = Vec12::Zero();
  Vec12 qdd = Vec12::Zero();       // finite-difference estimate per control step
  Vec12 tau_applied = Vec12::Zero();
  std::array<bool, kNumLegs> foot_contact{};
  std::array<double, kNumLegs> foot_height{};  // above the terrain beneath
  std::array<FootContact, kNumLegs> contact{};
  std::array<Vec3, kNumLegs> foot_prev = {};   // previous-substep positions
  bool feet_prev_valid = false;
  double time = 0;

  Vec3 gravity_body() const { return orientation.conjugate() * Vec3(0, 0, -1); }
  Vec3 v_body() const { return orientation.conjugate() * v; }
  Vec3 omega_body() const { return orientation.conjugate() * omega; }
  Vec3 rpy() const { return quat_to_rpy(orientation); }
};

/// World-frame foot positions for a base pose and joint vector.
std::array<Vec3, kNumLegs> forward_kinematics(const RobotModel& model, const Vec3& base_p,
                                              const Quat& base_q, const Vec12& q);
/// World-frame knee (upper/lower limb joint) positions.
std::array<Vec3, kNumLegs> knee_positions(const RobotModel& model, const Vec3& base_p,
                                          const Quat& base_q, const Vec12& q);

/// tau_j = clip(Kp (q_target - q) - Kd qd, +-tau_max).
Vec12 pd_torque(const RobotModel& model, const Vec12& q_target, const Vec12& q,
                const Vec12& qd, double torque_limit_override = -1);

struct ContactResult {
  Vec3 force = Vec3::Zero();
  bool active = false;
};

/// Penalty contact for one foot. Normal: spring-damper, never attractive.
/// Tangential: anchor spring-damper clamped to the Coulomb cone; the anchor
/// slides when the cone saturates.
ContactResult contact_force(const Terrain& terrain, const SimConfig& config,
                            const Vec3& foot_pos, const Vec3& foot_vel,
                            FootContact& contact);

struct StepExtras {
  Vec3 velocity_kick = Vec3::Zero();       // applied once at the first substep
  double torque_limit_override = -1;       // <0 keeps the model value
};

/// Advances one control period (substeps() semi-implicit Euler steps with a
/// trapezoidal position update). `action` holds 12 joint-target offsets in
/// [-1, 1] around q_default. Throws SimulationFault if the state leaves the
/// finite range.
void step(RobotState& state, const Vec12& action, const RobotModel& model,
          const Terrain& terrain, const SimConfig& config,
          const StepExtras& extras = {});

struct InitSpec {
  double x = 1.0, y = 2.0, yaw = 0.0;
  double q_jitter = 0.0;    // uniform +- rad on each joint
  double yaw_jitter = 0.0;  // uniform +- rad
  double z_offset = 0.001;  // lift above exact foot touch
};

/// Places the robot at the spawn pose with feet resolved onto the terrain.
/// Throws std::invalid_argument if the torso would start inside the terrain.
RobotState reset(const RobotModel& model, const Terrain& terrain, const InitSpec& spec,
                 Rng& rng);

/// Board/knee/torso contact with flagged board cells (broad-jump scoring).
bool board_contact(const RobotModel& model, const Terrain& terrain, const RobotState& state);

/// Lowest knee height above gap cells; nullopt when no knee is over a gap.
std::optional<double> min_knee_height_over_gap(const RobotModel& model, const Terrain& terrain,
                                               const RobotState& state);

}  // namespace barkour
