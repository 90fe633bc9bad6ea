#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "barkour/terrain.hpp"

namespace barkour {

struct TrajectorySample {
  double t = 0;
  Vec3 torso_position = Vec3::Zero();
  double yaw = 0, roll = 0, pitch = 0;
  bool board_contact = false;
  bool knee_floor_contact = false;
};

enum class ObstacleStatus { kSucceeded, kFailed, kSkipped };

std::string to_string(ObstacleStatus s);

struct ObstacleOutcome {
  ObstacleKind kind{};
  ObstacleStatus status = ObstacleStatus::kSkipped;
  double evidence_t = 0;  // first violation, or completion, or skip-decided time
};

/// penalties = every deduction applied to the score: 0.01 per full second of
/// excess time plus 0.1 per failed or skipped obstacle (pre-clamp).
struct ScoreReport {
  double t_run = 0;
  double t_allotted = 0;
  std::vector<ObstacleOutcome> outcomes;
  double penalties = 0;
  double r_agility = 0;
  bool completed = false;
};

struct Timing {
  double t_start = 0;
  std::optional<double> t_stop;  // arrival at the end table, 5 s hold verified
};

inline constexpr double kTableOnRadius = 0.4;    // "to within 0.4 m of" center
inline constexpr double kTableOffRadius = 0.7;   // "0.7 m away from" center
inline constexpr double kEndTableHoldSeconds = 5.0;
inline constexpr double kPoleMinDistance = 0.1;
inline constexpr double kEngagementMargin = 0.5;

/// Timer starts when the torso center first leaves the start-table top
/// footprint, stops at the first arrival within 0.4 m of the end-table
/// center, and the stop is valid only if the robot stays within that radius
/// for the following 5 s of trajectory. Throws std::invalid_argument if the
/// trajectory does not begin on the start table or never leaves it.
Timing detect_timing(std::span<const TrajectorySample> trajectory, const Course& course);

/// Geometric acceptance predicate for a single obstacle over the run window.
/// Total: always returns one of succeeded/failed/skipped.
ObstacleOutcome check_obstacle(const Obstacle& obstacle,
                               std::span<const TrajectorySample> window);

/// Eq.-style score: 1.0 minus 0.01 per full second over the allotted time
/// minus 0.1 per failed or skipped obstacle, clamped below at zero. Computed
/// in integer hundredths so anchor values come out exact.
double agility_score(double t_run, const std::vector<ObstacleOutcome>& outcomes,
                     double t_allotted);

/// Composition: detect timing, check every obstacle within the run window,
/// replay the running score to find the first zero crossing, and assemble the
/// report. Propagates detect_timing errors.
ScoreReport score_run(std::span<const TrajectorySample> trajectory, const Course& course);

}  // namespace barkour
