#include "barkour/scoring.hpp"

#include <algorithm>
#include <cmath>

namespace barkour {

std::string to_string(ObstacleStatus s) {
  switch (s) {
    case ObstacleStatus::kSucceeded: return "succeeded";
    case ObstacleStatus::kFailed: return "failed";
    case ObstacleStatus::kSkipped: return "skipped";
  }
  return "?";
}

namespace {

Vec2 xy(const TrajectorySample& s) { return {s.torso_position.x(), s.torso_position.y()}; }

bool on_table_top(const Obstacle& table, const Vec2& p) {
  Vec2 l = table.to_local(p);
  return std::abs(l.x()) <= kTableHalf && std::abs(l.y()) <= kTableHalf;
}

struct Crossing {
  double t;
  int line;    // index of the crossed segment
  int dir;     // sign of the crossing relative to the segment direction
};

// Proper segment-segment intersection between the motion segment p0->p1 and
// the gate a->b. Touching endpoints count as a crossing.
std::optional<int> segment_crossing(const Vec2& p0, const Vec2& p1, const Vec2& a,
                                    const Vec2& b) {
  const Vec2 r = p1 - p0, s = b - a;
  const double denom = r.x() * s.y() - r.y() * s.x();
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const Vec2 qp = a - p0;
  const double tpar = (qp.x() * s.y() - qp.y() * s.x()) / denom;
  const double upar = (qp.x() * r.y() - qp.y() * r.x()) / denom;
  if (tpar < 0.0 || tpar > 1.0 || upar < 0.0 || upar > 1.0) return std::nullopt;
  // Direction: which side of the gate the motion came from.
  const double side = s.x() * r.y() - s.y() * r.x();
  return side > 0 ? 1 : -1;
}

std::vector<Crossing> collect_crossings(std::span<const TrajectorySample> w,
                                        const std::vector<Segment2>& lines) {
  std::vector<Crossing> out;
  for (size_t i = 0; i + 1 < w.size(); ++i) {
    const Vec2 p0 = xy(w[i]), p1 = xy(w[i + 1]);
    for (size_t li = 0; li < lines.size(); ++li) {
      if (auto dir = segment_crossing(p0, p1, lines[li].a, lines[li].b))
        out.push_back({w[i + 1].t, static_cast<int>(li), *dir});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Crossing& a, const Crossing& b) { return a.t < b.t; });
  return out;
}

bool engaged(const Obstacle& o, std::span<const TrajectorySample> w, double* t_first) {
  for (const auto& s : w) {
    if (o.in_engagement(xy(s), kEngagementMargin)) {
      if (t_first) *t_first = s.t;
      return true;
    }
  }
  return false;
}

ObstacleOutcome check_table(const Obstacle& o, std::span<const TrajectorySample> w) {
  ObstacleOutcome out{o.kind, ObstacleStatus::kSkipped, w.empty() ? 0 : w.back().t};
  if (o.kind == ObstacleKind::kStartTable) {
    // The run starts on it; success is stepping 0.7 m off the center.
    for (const auto& s : w) {
      if ((xy(s) - o.center()).norm() >= kTableOffRadius) {
        out.status = ObstacleStatus::kSucceeded;
        out.evidence_t = s.t;
        return out;
      }
    }
    out.status = ObstacleStatus::kFailed;
    return out;
  }
  // End table: success is the timed arrival plus the 5 s hold.
  double t_first = 0;
  if (!engaged(o, w, &t_first)) return out;
  size_t arrive = w.size();
  for (size_t i = 0; i < w.size(); ++i) {
    if ((xy(w[i]) - o.center()).norm() < kTableOnRadius) {
      arrive = i;
      break;
    }
  }
  if (arrive == w.size()) {
    out.status = ObstacleStatus::kFailed;
    return out;
  }
  const double t_arr = w[arrive].t;
  bool held = w.back().t >= t_arr + kEndTableHoldSeconds;
  for (size_t i = arrive; i < w.size() && w[i].t <= t_arr + kEndTableHoldSeconds; ++i) {
    if ((xy(w[i]) - o.center()).norm() >= kTableOnRadius) {
      held = false;
      break;
    }
  }
  out.status = held ? ObstacleStatus::kSucceeded : ObstacleStatus::kFailed;
  out.evidence_t = t_arr;
  return out;
}

ObstacleOutcome check_weave(const Obstacle& o, std::span<const TrajectorySample> w) {
  ObstacleOutcome out{o.kind, ObstacleStatus::kSkipped, w.empty() ? 0 : w.back().t};
  double t_first = 0;
  if (!engaged(o, w, &t_first)) return out;

  // Minimum pole clearance applies while inside the engagement region.
  const auto poles = o.pole_positions();
  for (const auto& s : w) {
    if (!o.in_engagement(xy(s), kEngagementMargin)) continue;
    for (const auto& p : poles) {
      if ((xy(s) - p).norm() < kPoleMinDistance) {
        out.status = ObstacleStatus::kFailed;
        out.evidence_t = s.t;
        return out;
      }
    }
  }

  // Gates must be crossed in order with alternating sides; the first side is
  // free. Non-matching crossings are retries and simply do not progress.
  const auto crossings = collect_crossings(w, o.gates());
  int next = 0;
  int want_dir = 0;  // 0 = free
  double t_done = 0;
  for (const auto& c : crossings) {
    if (c.line != next) continue;
    if (want_dir != 0 && c.dir != want_dir) continue;
    want_dir = -c.dir;
    ++next;
    t_done = c.t;
    if (next == static_cast<int>(o.gates().size())) break;
  }
  if (next == static_cast<int>(o.gates().size())) {
    out.status = ObstacleStatus::kSucceeded;
    out.evidence_t = t_done;
  } else {
    out.status = ObstacleStatus::kFailed;
    out.evidence_t = w.back().t;
  }
  return out;
}

ObstacleOutcome check_aframe(const Obstacle& o, std::span<const TrajectorySample> w) {
  ObstacleOutcome out{o.kind, ObstacleStatus::kSkipped, w.empty() ? 0 : w.back().t};
  double t_first = 0;
  if (!engaged(o, w, &t_first)) return out;

  // bottom A (0), apex (1), bottom B (2), traversed in either direction.
  const auto crossings = collect_crossings(w, o.aframe_lines());
  int stage_fwd = 0, stage_rev = 0;  // 0->1->2->3
  static constexpr int fwd[3] = {0, 1, 2};
  static constexpr int rev[3] = {2, 1, 0};
  for (const auto& c : crossings) {
    if (stage_fwd < 3 && c.line == fwd[stage_fwd]) ++stage_fwd;
    if (stage_rev < 3 && c.line == rev[stage_rev]) ++stage_rev;
    if (stage_fwd == 3 || stage_rev == 3) {
      out.status = ObstacleStatus::kSucceeded;
      out.evidence_t = c.t;
      return out;
    }
  }
  out.status = ObstacleStatus::kFailed;
  out.evidence_t = w.back().t;
  return out;
}

ObstacleOutcome check_jump(const Obstacle& o, std::span<const TrajectorySample> w) {
  ObstacleOutcome out{o.kind, ObstacleStatus::kSkipped, w.empty() ? 0 : w.back().t};
  double t_first = 0;
  if (!engaged(o, w, &t_first)) return out;

  for (const auto& s : w) {
    if (s.board_contact) {
      out.status = ObstacleStatus::kFailed;
      out.evidence_t = s.t;
      return out;
    }
  }
  // Clearing means crossing both board edges, in either direction.
  const auto crossings = collect_crossings(w, o.board_edges());
  bool seen[2] = {false, false};
  for (const auto& c : crossings) {
    seen[c.line] = true;
    if (seen[0] && seen[1]) {
      out.status = ObstacleStatus::kSucceeded;
      out.evidence_t = c.t;
      return out;
    }
  }
  out.status = ObstacleStatus::kFailed;
  out.evidence_t = w.back().t;
  return out;
}

}  // namespace

Timing detect_timing(std::span<const TrajectorySample> trajectory, const Course& course) {
  if (trajectory.empty()) throw std::invalid_argument("empty trajectory");
  const Obstacle& start = course.start_table();
  const Obstacle& end = course.end_table();
  if (!on_table_top(start, xy(trajectory.front())))
    throw std::invalid_argument("trajectory does not begin on the start table");

  std::optional<double> t_start;
  for (const auto& s : trajectory) {
    if (!on_table_top(start, xy(s))) {
      t_start = s.t;
      break;
    }
  }
  if (!t_start) throw std::invalid_argument("robot never leaves the start table");

  Timing timing{*t_start, std::nullopt};
  std::optional<size_t> arrive;
  for (size_t i = 0; i < trajectory.size(); ++i) {
    if (trajectory[i].t < *t_start) continue;
    if ((xy(trajectory[i]) - end.center()).norm() < kTableOnRadius) {
      arrive = i;
      break;
    }
  }
  if (!arrive) return timing;

  const double t_arr = trajectory[*arrive].t;
  bool held = trajectory.back().t >= t_arr + kEndTableHoldSeconds;
  for (size_t i = *arrive; i < trajectory.size(); ++i) {
    if (trajectory[i].t > t_arr + kEndTableHoldSeconds) break;
    if ((xy(trajectory[i]) - end.center()).norm() >= kTableOnRadius) {
      held = false;
      break;
    }
  }
  if (held) timing.t_stop = t_arr;
  return timing;
}

ObstacleOutcome check_obstacle(const Obstacle& obstacle,
                               std::span<const TrajectorySample> window) {
  switch (obstacle.kind) {
    case ObstacleKind::kStartTable:
    case ObstacleKind::kEndTable: return check_table(obstacle, window);
    case ObstacleKind::kWeavePoles: return check_weave(obstacle, window);
    case ObstacleKind::kAFrame: return check_aframe(obstacle, window);
    case ObstacleKind::kBroadJump: return check_jump(obstacle, window);
  }
  return {};
}

double agility_score(double t_run, const std::vector<ObstacleOutcome>& outcomes,
                     double t_allotted) {
  if (t_run < 0) throw std::invalid_argument("t_run must be non-negative");
  int bad = 0;
  for (const auto& o : outcomes)
    if (o.status != ObstacleStatus::kSucceeded) ++bad;
  const double excess = std::max(t_run - t_allotted, 0.0);
  // One cent per full second, ten per failed/skipped obstacle.
  const long long cents = 100 - static_cast<long long>(std::floor(excess + 1e-9)) -
                          10ll * bad;
  return cents <= 0 ? 0.0 : static_cast<double>(cents) / 100.0;
}

ScoreReport score_run(std::span<const TrajectorySample> trajectory, const Course& course) {
  ScoreReport report;
  report.t_allotted = allotted_time(course);

  const Timing timing = detect_timing(trajectory, course);

  // Run window: from the timing start to the stop (or the end of the log).
  size_t w0 = 0;
  while (w0 < trajectory.size() && trajectory[w0].t < timing.t_start) ++w0;
  size_t w1 = trajectory.size();
  if (timing.t_stop) {
    w1 = w0;
    while (w1 < trajectory.size() && trajectory[w1].t <= *timing.t_stop) ++w1;
  }
  // The end table needs its 5 s hold, so it sees the full tail.
  const std::span<const TrajectorySample> window = trajectory.subspan(w0, w1 - w0);
  const std::span<const TrajectorySample> tail = trajectory.subspan(w0);

  for (const auto& o : course.obstacles) {
    const bool is_end = &o == &course.obstacles.back();
    report.outcomes.push_back(check_obstacle(o, is_end ? tail : window));
  }

  // Skips become evident when a later obstacle is first engaged (or at the
  // end of the run); replace their evidence time accordingly.
  for (size_t i = 0; i < report.outcomes.size(); ++i) {
    if (report.outcomes[i].status != ObstacleStatus::kSkipped) continue;
    double t_evident = trajectory.back().t;
    for (size_t j = i + 1; j < course.obstacles.size(); ++j) {
      double t_first = 0;
      if (engaged(course.obstacles[j], tail, &t_first)) {
        t_evident = std::min(t_evident, t_first);
        break;
      }
    }
    report.outcomes[i].evidence_t = t_evident;
  }

  // Replay the running score to find a zero crossing: penalties take effect
  // at their evidence times, the time deduction grows one cent per full
  // second past t_allotted.
  const double t_end = trajectory.back().t;
  const double t_horizon = timing.t_stop ? *timing.t_stop : t_end;
  std::optional<double> t_zero;
  for (double k = 0;; k += 1.0) {
    const double t = timing.t_start + report.t_allotted + k;  // k full seconds excess
    if (t > t_horizon + 1.0) break;
    int bad = 0;
    for (const auto& o : report.outcomes)
      if (o.status != ObstacleStatus::kSucceeded && o.evidence_t <= t) ++bad;
    const long long cents = 100 - static_cast<long long>(k) - 10ll * bad;
    if (cents <= 0) {
      t_zero = t;
      break;
    }
  }

  if (timing.t_stop && (!t_zero || *timing.t_stop <= *t_zero)) {
    report.completed = true;
    report.t_run = *timing.t_stop - timing.t_start;
    report.r_agility = agility_score(report.t_run, report.outcomes, report.t_allotted);
  } else {
    report.completed = false;
    report.t_run = (t_zero ? *t_zero : t_end) - timing.t_start;
    report.r_agility =
        t_zero ? 0.0 : agility_score(report.t_run, report.outcomes, report.t_allotted);
  }
  int bad = 0;
  for (const auto& o : report.outcomes)
    if (o.status != ObstacleStatus::kSucceeded) ++bad;
  report.penalties =
      std::floor(std::max(report.t_run - report.t_allotted, 0.0) + 1e-9) * 0.01 +
      0.1 * bad;
  return report;
}

}  // namespace barkour
