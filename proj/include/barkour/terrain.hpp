#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "barkour/common.hpp"

namespace barkour {

enum class ObstacleKind { kStartTable, kEndTable, kWeavePoles, kAFrame, kBroadJump };

std::string to_string(ObstacleKind k);
ObstacleKind obstacle_kind_from_string(const std::string& s);

// Fixed obstacle geometry. Tables are 1x1x0.1 m boxes, the A-frame is a pair
// of 30-degree ramps meeting at a 1 m apex with 1 m wide sides, the jump
// board is 0.5 m (travel) x 1 m (lateral) and flush with the floor, and the
// weave poles are five 0.05 m diameter markers.
inline constexpr double kTableHalf = 0.5;
inline constexpr double kTableHeight = 0.1;
inline constexpr double kAFrameApexHeight = 1.0;
inline constexpr double kAFrameHalfWidth = 0.5;   // lateral
inline constexpr double kAFrameIncline = kPi / 6.0;  // 30 degrees
inline constexpr double kBoardHalfLength = 0.25;  // along travel
inline constexpr double kBoardHalfWidth = 0.5;
inline constexpr double kPoleRadius = 0.025;
inline constexpr int kNumPoles = 5;

/// Horizontal half-extent of one A-frame ramp: apex height / tan(30 deg).
inline double aframe_half_extent() { return kAFrameApexHeight / std::tan(kAFrameIncline); }

struct Segment2 {
  Vec2 a, b;
};

struct Obstacle {
  ObstacleKind kind{};
  double x = 0, y = 0, yaw = 0;  // world pose
  std::vector<double> pole_spacing;  // weave poles only, 4 gaps in [0.5, 0.8]
  double nominal_size = 0;           // d_obstacle, from the score table

  Vec2 center() const { return {x, y}; }
  Vec2 to_local(const Vec2& world) const;
  Vec2 to_world(const Vec2& local) const;

  /// Tight footprint half-extents in the local frame (x along yaw).
  Vec2 footprint_half() const;
  /// True if the point lies within the footprint inflated by `margin`.
  bool in_engagement(const Vec2& world, double margin = 0.5) const;

  /// Weave poles: world pole centers (pose anchors the first pole, the line
  /// of poles extends along local +x).
  std::vector<Vec2> pole_positions() const;
  /// Weave poles: the four inter-pole gates, in traversal order.
  std::vector<Segment2> gates() const;

  /// A-frame: [bottom edge side A, apex ridge, bottom edge side B].
  std::vector<Segment2> aframe_lines() const;
  /// Broad jump: the two board edges transverse to travel, in local +x order.
  std::vector<Segment2> board_edges() const;
};

double nominal_size_for(ObstacleKind k);

struct Course {
  double width = 5.0, depth = 5.0;
  std::vector<Obstacle> obstacles;  // traversal == scoring order
  double v_target = 1.69;           // m/s

  const Obstacle& start_table() const;
  const Obstacle& end_table() const;
};

/// Regular-grid terrain. Heights live on nodes (bilinear interpolation);
/// friction and the board/gap masks live on cells. Immutable once built.
struct Terrain {
  double cell = 0.05;
  int nx = 0, ny = 0;  // node counts
  std::vector<double> height;    // nx*ny, row-major (ix*ny + iy)
  std::vector<double> friction;  // (nx-1)*(ny-1)
  std::vector<uint8_t> board_mask;  // per cell
  std::vector<uint8_t> gap_mask;    // per cell: sensed as -1 by heightfields
  std::string generator_kind;
  uint64_t seed = 0;

  double width() const { return (nx - 1) * cell; }
  double depth() const { return (ny - 1) * cell; }
  bool in_bounds(double x, double y) const {
    return x >= 0 && y >= 0 && x <= width() && y <= depth();
  }

  double& h(int ix, int iy) { return height[ix * ny + iy]; }
  double h(int ix, int iy) const { return height[ix * ny + iy]; }

  /// Bilinear height; throws std::out_of_range outside the grid.
  double height_at(double x, double y) const;
  /// Same, but clamps the query to the terrain edge.
  double height_at_clamped(double x, double y) const;
  /// Outward unit surface normal of the interpolated surface.
  Vec3 normal_at(double x, double y) const;

  double friction_at(double x, double y) const;
  bool board_at(double x, double y) const;
  bool gap_at(double x, double y) const;

  bool cell_flag(const std::vector<uint8_t>& m, double x, double y) const;
};

struct CourseLayout {
  double width = 5.0, depth = 5.0;
  double v_target = 1.69;
  struct Entry {
    std::string kind;
    double x = 0, y = 0, yaw = 0;
    std::vector<double> pole_spacing;  // optional, weave poles
  };
  std::vector<Entry> obstacles;

  static CourseLayout barkour_default();
  static CourseLayout from_json_file(const std::string& path);
  std::string to_json() const;
  void save(const std::string& path) const;
};

/// Validates the layout, orders obstacles, and rasterizes the terrain.
/// Throws std::invalid_argument on overlapping obstacles, out-of-area poses,
/// or pole spacings outside [0.5, 0.8] m.
std::pair<Course, Terrain> build_barkour_course(const CourseLayout& layout,
                                                double cell = 0.05);

enum class TerrainKind { kFlat, kSlope, kStairs, kRandomSteps, kGaps };

std::string to_string(TerrainKind k);
TerrainKind terrain_kind_from_string(const std::string& s);

struct TerrainParams {
  double width = 10.0, depth = 4.0;
  // slope: a sequence of triangular hills.
  double slope_incline_lo = 0.5, slope_incline_hi = 0.58;  // rad
  double hill_height = 1.0;
  int hill_count = 2;
  // stairs: ascending flight followed by a descending one.
  double step_height_lo = 0.07, step_height_hi = 0.16;
  double stair_tread = 0.3;
  int stair_count = 6;
  // random steps: square tiles of randomized height.
  double tile_size = 0.5;
  // gaps: strips transverse to travel, sensed and physical.
  double gap_width_lo = 0.5, gap_width_hi = 0.7;
  std::optional<double> gap_width_fixed;
  double gap_spacing = 2.5;
  int gap_count = 2;
  double friction = 1.0;
};

/// Deterministic per (kind, params, seed).
Terrain build_training_terrain(TerrainKind kind, const TerrainParams& params,
                               uint64_t seed, double cell = 0.05);

/// Sum over obstacles of d_obstacle / v_target, each truncated to 0.01 s.
double allotted_time(const Course& course);
double allotted_time_for(double nominal_size, double v_target);

}  // namespace barkour
