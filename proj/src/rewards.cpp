#include "barkour/rewards.hpp"

namespace barkour {

std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::kOwp: return "owp";
    case PolicyKind::kSdp: return "sdp";
    case PolicyKind::kJp: return "jp";
    case PolicyKind::kMultitask: return "multitask";
  }
  return "?";
}

PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "owp") return PolicyKind::kOwp;
  if (s == "sdp" || s == "scp") return PolicyKind::kSdp;
  if (s == "jp") return PolicyKind::kJp;
  if (s == "multitask") return PolicyKind::kMultitask;
  throw SchemaError("unknown policy kind: " + s);
}

const char* reward_term_name(int term) {
  static const char* names[kNumRewardTerms] = {
      "track_lin_vel", "track_ang_vel", "forward_vel",   "base_height",
      "vertical_vel",  "roll_pitch_vel", "orientation",  "torque",
      "joint_accel",   "action_delta",  "action_magnitude", "feet_clearance",
      "stand_still",   "jump_height",
  };
  return names[term];
}

RewardConfig RewardConfig::for_policy(PolicyKind kind) {
  RewardConfig c;
  auto& w = c.weights;
  switch (kind) {
    case PolicyKind::kOwp:
    case PolicyKind::kMultitask:
      w[kTrackLinVel] = 2;
      w[kTrackAngVel] = 1;
      w[kForwardVel] = 0;
      w[kBaseHeight] = 5;
      w[kVerticalVel] = 2;
      w[kRollPitchVel] = 0.05;
      w[kOrientation] = 5;
      w[kTorque] = 2e-4;
      w[kJointAccel] = 2.5e-7;
      w[kActionDelta] = 0.05;
      w[kActionMagnitude] = 0.02;
      w[kFeetClearance] = 0.25;
      w[kStandStill] = 0.1;
      w[kJumpHeight] = 0;
      c.v_max = 1.5;
      break;
    case PolicyKind::kSdp:
      w[kTrackLinVel] = 0;
      w[kTrackAngVel] = 0;
      w[kForwardVel] = 4;
      w[kBaseHeight] = 0;
      w[kVerticalVel] = 2;
      w[kRollPitchVel] = 0.05;
      w[kOrientation] = 0.5;
      w[kTorque] = 2e-4;
      w[kJointAccel] = 2.5e-7;
      w[kActionDelta] = 0.05;
      w[kActionMagnitude] = 0.02;
      w[kFeetClearance] = 0.1;
      w[kStandStill] = 0;
      w[kJumpHeight] = 0;
      c.v_max = 1.5;
      break;
    case PolicyKind::kJp:
      w[kTrackLinVel] = 0;
      w[kTrackAngVel] = 1;
      w[kForwardVel] = 3;
      w[kBaseHeight] = 0;
      w[kVerticalVel] = 1;
      w[kRollPitchVel] = 0.05;
      w[kOrientation] = 0.5;
      w[kTorque] = 2e-4;
      w[kJointAccel] = 2.5e-7;
      w[kActionDelta] = 0.075;
      w[kActionMagnitude] = 0.025;
      w[kFeetClearance] = 0.1;
      w[kStandStill] = 0;
      w[kJumpHeight] = 25;
      c.v_max = 2.25;
      break;
  }
  return c;
}

std::array<double, kNumRewardTerms> eval_terms(const RobotState& state,
                                               const RobotState& prev_state,
                                               const Vec12& action, const Vec12& prev_action,
                                               const Vec3& command, const Terrain& terrain,
                                               const RewardConfig& config) {
  std::array<double, kNumRewardTerms> r{};

  const Vec3 v = state.v_body();
  const Vec3 w = state.omega_body();
  const Vec3 g = state.gravity_body();

  const double ex = v.x() - command.x();
  const double ey = v.y() - command.y();
  r[kTrackLinVel] = std::exp(-4.0 * ex * ex - 4.0 * ey * ey);

  const double ew = command.z() - w.z();
  r[kTrackAngVel] = std::exp(-4.0 * ew * ew);

  r[kForwardVel] = clamp(v.x(), -config.v_max, config.v_max);

  const double dz = state.p.z() - config.target_height;
  r[kBaseHeight] = -dz * dz;

  r[kVerticalVel] = -v.z() * v.z();
  r[kRollPitchVel] = -w.x() * w.x() - w.y() * w.y();
  r[kOrientation] = config.orientation_xy ? -(g.x() * g.x() + g.y() * g.y())
                                          : -g.z() * g.z();

  r[kTorque] = -state.tau_applied.squaredNorm();
  r[kJointAccel] = -state.qdd.squaredNorm();
  r[kActionDelta] = -(action - prev_action).squaredNorm();
  r[kActionMagnitude] = -action.squaredNorm();

  double clearance = 0;
  for (int leg = 0; leg < kNumLegs; ++leg)
    if (!state.foot_contact[leg]) clearance += state.foot_height[leg];
  r[kFeetClearance] = clearance;

  if (command.norm() <= 0.1) {
    const double dev = (state.q - config.q_nominal).squaredNorm();
    r[kStandStill] = config.stand_still_as_printed ? dev : -dev;
  }

  const Vec3 rpy = state.rpy();
  const bool upright = std::abs(rpy.x()) < config.upright_limit &&
                       std::abs(rpy.y()) < config.upright_limit;
  if (upright && terrain.gap_at(state.p.x(), state.p.y())) r[kJumpHeight] = state.p.z();

  (void)prev_state;
  return r;
}

double total_reward(const std::array<double, kNumRewardTerms>& terms,
                    const RewardConfig& config) {
  double sum = 0;
  for (int i = 0; i < kNumRewardTerms; ++i) sum += config.weights[i] * terms[i];
  return config.scale_by_dt ? sum * config.control_dt : sum;
}

}  // namespace barkour
