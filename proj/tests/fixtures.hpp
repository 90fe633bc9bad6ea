#pragma once

// Shared synthetic-trajectory helpers for scoring and navigation tests.

#include <cmath>
#include <vector>

#include "barkour/scoring.hpp"
#include "barkour/terrain.hpp"

namespace barkour::testing {

// Samples a polyline at 50 Hz: stands at points.front() until t_exit, then
// moves at constant speed so the last point is reached at t_arrive, then
// holds there for hold_s.
inline std::vector<TrajectorySample> path_trajectory(const std::vector<Vec2>& points,
                                                     double t_exit, double t_arrive,
                                                     double hold_s = 6.0,
                                                     double dt = 0.02) {
  std::vector<double> cum{0.0};
  for (size_t i = 0; i + 1 < points.size(); ++i)
    cum.push_back(cum.back() + (points[i + 1] - points[i]).norm());
  const double total = cum.back();
  const double duration = t_arrive - t_exit;

  std::vector<TrajectorySample> out;
  for (double t = 0; t <= t_arrive + hold_s + 1e-9; t += dt) {
    TrajectorySample s;
    s.t = t;
    Vec2 p;
    double heading = 0;
    if (t < t_exit) {
      p = points.front();
    } else if (t >= t_arrive) {
      p = points.back();
    } else {
      const double d = total * (t - t_exit) / duration;
      size_t seg = 0;
      while (seg + 2 < points.size() && cum[seg + 1] < d) ++seg;
      const double f = (d - cum[seg]) / std::max(cum[seg + 1] - cum[seg], 1e-12);
      p = points[seg] + f * (points[seg + 1] - points[seg]);
      Vec2 dir = points[seg + 1] - points[seg];
      heading = std::atan2(dir.y(), dir.x());
    }
    s.torso_position = {p.x(), p.y(), 0.3};
    s.yaw = heading;
    out.push_back(s);
  }
  return out;
}

// Tunes t_arrive so that detect_timing reports the requested run time (the
// timer starts at the footprint edge and stops at the 0.4 m arrival radius,
// both of which depend on path speed).
inline std::vector<TrajectorySample> trajectory_with_run_time(
    const Course& course, const std::vector<Vec2>& points, double target_t_run,
    double t_exit = 1.0, double hold_s = 6.0) {
  double t_arrive = t_exit + target_t_run;
  for (int pass = 0; pass < 4; ++pass) {
    auto traj = path_trajectory(points, t_exit, t_arrive, hold_s);
    const Timing tm = detect_timing(traj, course);
    if (!tm.t_stop) break;
    const double err = target_t_run - (*tm.t_stop - tm.t_start);
    if (std::abs(err) < 0.015) return traj;
    t_arrive += err;
  }
  return path_trajectory(points, t_exit, t_arrive, hold_s);
}

// A clean pass through the default Barkour layout: off the start table,
// alternating through all four weave gates, over the A-frame lines, across
// the jump board, onto the end table.
inline std::vector<Vec2> clean_run_path() {
  return {
      {0.7, 0.7},  {0.95, 1.3}, {0.95, 1.75}, {0.45, 2.1}, {0.95, 2.75},
      {0.45, 3.4}, {0.95, 4.05}, {1.3, 4.2},  {4.6, 4.2},  {4.2, 3.3},
      {4.2, 1.8},  {4.2, 0.7},
  };
}

// Sparse three-obstacle layout where the weave poles sit well away from the
// straight line between the tables, so skipping them is unambiguous.
inline CourseLayout sparse_weave_layout() {
  CourseLayout l;
  l.obstacles = {
      {"start_table", 0.7, 0.7, 0.0, {}},
      {"weave_poles", 0.7, 2.3, kPi / 2, {0.65, 0.65, 0.65, 0.65}},
      {"end_table", 4.2, 0.7, 0.0, {}},
  };
  return l;
}

inline std::vector<Vec2> skip_weave_path() {
  return {{0.7, 0.7}, {2.5, 0.7}, {4.2, 0.7}};
}

// Independently coded brute-force scorer: counts whole seconds one by one
// instead of using floor()/integer cents.
inline double brute_force_score(double t_run, int n_failed_or_skipped, double t_allotted) {
  double r = 1.0;
  int k = 0;
  while (t_run - t_allotted >= static_cast<double>(k + 1) - 1e-9) {
    r -= 0.01;
    ++k;
    if (k > 1000) break;
  }
  for (int i = 0; i < n_failed_or_skipped; ++i) r -= 0.1;
  return r < 0.0 ? 0.0 : r;
}

inline std::vector<ObstacleOutcome> outcomes_with_bad(int n_bad, int n_total = 5) {
  std::vector<ObstacleOutcome> v;
  for (int i = 0; i < n_total; ++i) {
    ObstacleOutcome o;
    o.kind = ObstacleKind::kWeavePoles;
    o.status = i < n_bad ? ObstacleStatus::kFailed : ObstacleStatus::kSucceeded;
    v.push_back(o);
  }
  return v;
}

}  // namespace barkour::testing
