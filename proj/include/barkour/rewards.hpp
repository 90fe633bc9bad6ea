#pragma once

#include <array>
#include <string>

#include "barkour/dynamics.hpp"

namespace barkour {

enum class PolicyKind { kOwp, kSdp, kJp, kMultitask };

std::string to_string(PolicyKind k);
PolicyKind policy_kind_from_string(const std::string& s);

inline constexpr int kNumRewardTerms = 14;

enum RewardTerm : int {
  kTrackLinVel = 0,
  kTrackAngVel,
  kForwardVel,
  kBaseHeight,
  kVerticalVel,
  kRollPitchVel,
  kOrientation,
  kTorque,
  kJointAccel,
  kActionDelta,
  kActionMagnitude,
  kFeetClearance,
  kStandStill,
  kJumpHeight,
};

const char* reward_term_name(int term);

struct RewardConfig {
  std::array<double, kNumRewardTerms> weights{};
  double v_max = 1.5;          // ForwardVel clip bound
  double target_height = 0.30; // p_z target
  Vec12 q_nominal = RobotModel::default_pose();
  bool scale_by_dt = true;
  double control_dt = 0.02;
  // The table prints Stand Still as a positive term and Orientation as
  // -g_z^2; both printed forms are the default, with switches for the
  // conventional readings.
  bool stand_still_as_printed = false;
  bool orientation_xy = false;
  // "Upright over gap" tilt bound for the Jump Height term.
  double upright_limit = kPi / 6;

  static RewardConfig for_policy(PolicyKind kind);
};

/// One value per reward-table row, exactly per its formula.
std::array<double, kNumRewardTerms> eval_terms(const RobotState& state,
                                               const RobotState& prev_state,
                                               const Vec12& action, const Vec12& prev_action,
                                               const Vec3& command, const Terrain& terrain,
                                               const RewardConfig& config);

/// Weighted sum, scaled by the control dt when enabled.
double total_reward(const std::array<double, kNumRewardTerms>& terms,
                    const RewardConfig& config);

}  // namespace barkour
