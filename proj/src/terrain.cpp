#include "barkour/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace barkour {

using json = nlohmann::json;

std::string to_string(ObstacleKind k) {
  switch (k) {
    case ObstacleKind::kStartTable: return "start_table";
    case ObstacleKind::kEndTable: return "end_table";
    case ObstacleKind::kWeavePoles: return "weave_poles";
    case ObstacleKind::kAFrame: return "a_frame";
    case ObstacleKind::kBroadJump: return "broad_jump";
  }
  return "?";
}

ObstacleKind obstacle_kind_from_string(const std::string& s) {
  if (s == "start_table") return ObstacleKind::kStartTable;
  if (s == "end_table") return ObstacleKind::kEndTable;
  if (s == "weave_poles") return ObstacleKind::kWeavePoles;
  if (s == "a_frame") return ObstacleKind::kAFrame;
  if (s == "broad_jump") return ObstacleKind::kBroadJump;
  throw SchemaError("unknown obstacle kind: " + s);
}

double nominal_size_for(ObstacleKind k) {
  switch (k) {
    case ObstacleKind::kStartTable:
    case ObstacleKind::kEndTable: return 1.0;
    case ObstacleKind::kWeavePoles: return 6.0;
    case ObstacleKind::kAFrame: return 6.0;
    case ObstacleKind::kBroadJump: return 4.0;
  }
  return 0.0;
}

Vec2 Obstacle::to_local(const Vec2& world) const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const Vec2 d = world - Vec2(x, y);
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y()};
}

Vec2 Obstacle::to_world(const Vec2& local) const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {x + c * local.x() - s * local.y(), y + s * local.x() + c * local.y()};
}

Vec2 Obstacle::footprint_half() const {
  switch (kind) {
    case ObstacleKind::kStartTable:
    case ObstacleKind::kEndTable: return {kTableHalf, kTableHalf};
    case ObstacleKind::kAFrame: return {aframe_half_extent(), kAFrameHalfWidth};
    case ObstacleKind::kBroadJump: return {kBoardHalfLength, kBoardHalfWidth};
    case ObstacleKind::kWeavePoles: {
      double len = 0;
      for (double s : pole_spacing) len += s;
      // pose anchors pole 1; footprint is the pole line plus pole radius.
      return {len / 2 + kPoleRadius, kPoleRadius};
    }
  }
  return {0, 0};
}

bool Obstacle::in_engagement(const Vec2& world, double margin) const {
  Vec2 half = footprint_half();
  Vec2 l = to_local(world);
  if (kind == ObstacleKind::kWeavePoles) l.x() -= half.x() - kPoleRadius;  // shift to line midpoint
  return std::abs(l.x()) <= half.x() + margin && std::abs(l.y()) <= half.y() + margin;
}

std::vector<Vec2> Obstacle::pole_positions() const {
  std::vector<Vec2> out;
  double lx = 0;
  out.push_back(to_world({lx, 0}));
  for (double s : pole_spacing) {
    lx += s;
    out.push_back(to_world({lx, 0}));
  }
  return out;
}

std::vector<Segment2> Obstacle::gates() const {
  const auto poles = pole_positions();
  std::vector<Segment2> out;
  for (size_t i = 0; i + 1 < poles.size(); ++i) out.push_back({poles[i], poles[i + 1]});
  return out;
}

std::vector<Segment2> Obstacle::aframe_lines() const {
  const double e = aframe_half_extent();
  const double w = kAFrameHalfWidth;
  return {
      {to_world({-e, -w}), to_world({-e, w})},
      {to_world({0.0, -w}), to_world({0.0, w})},
      {to_world({e, -w}), to_world({e, w})},
  };
}

std::vector<Segment2> Obstacle::board_edges() const {
  return {
      {to_world({-kBoardHalfLength, -kBoardHalfWidth}), to_world({-kBoardHalfLength, kBoardHalfWidth})},
      {to_world({kBoardHalfLength, -kBoardHalfWidth}), to_world({kBoardHalfLength, kBoardHalfWidth})},
  };
}

const Obstacle& Course::start_table() const {
  if (obstacles.empty() || obstacles.front().kind != ObstacleKind::kStartTable)
    throw std::invalid_argument("course does not begin with a start table");
  return obstacles.front();
}

const Obstacle& Course::end_table() const {
  if (obstacles.empty() || obstacles.back().kind != ObstacleKind::kEndTable)
    throw std::invalid_argument("course does not end with an end table");
  return obstacles.back();
}

double Terrain::height_at(double x, double y) const {
  if (!in_bounds(x, y)) {
    std::ostringstream os;
    os << "terrain query out of bounds: (" << x << ", " << y << ")";
    throw std::out_of_range(os.str());
  }
  return height_at_clamped(x, y);
}

double Terrain::height_at_clamped(double x, double y) const {
  x = clamp(x, 0.0, width());
  y = clamp(y, 0.0, depth());
  int ix = std::min(static_cast<int>(x / cell), nx - 2);
  int iy = std::min(static_cast<int>(y / cell), ny - 2);
  ix = std::max(ix, 0);
  iy = std::max(iy, 0);
  const double fx = x / cell - ix, fy = y / cell - iy;
  const double h00 = h(ix, iy), h10 = h(ix + 1, iy);
  const double h01 = h(ix, iy + 1), h11 = h(ix + 1, iy + 1);
  return h00 * (1 - fx) * (1 - fy) + h10 * fx * (1 - fy) + h01 * (1 - fx) * fy +
         h11 * fx * fy;
}

Vec3 Terrain::normal_at(double x, double y) const {
  x = clamp(x, 0.0, width());
  y = clamp(y, 0.0, depth());
  int ix = std::min(static_cast<int>(x / cell), nx - 2);
  int iy = std::min(static_cast<int>(y / cell), ny - 2);
  ix = std::max(ix, 0);
  iy = std::max(iy, 0);
  const double fx = x / cell - ix, fy = y / cell - iy;
  const double h00 = h(ix, iy), h10 = h(ix + 1, iy);
  const double h01 = h(ix, iy + 1), h11 = h(ix + 1, iy + 1);
  const double dhdx = ((h10 - h00) * (1 - fy) + (h11 - h01) * fy) / cell;
  const double dhdy = ((h01 - h00) * (1 - fx) + (h11 - h10) * fx) / cell;
  Vec3 n(-dhdx, -dhdy, 1.0);
  return n.normalized();
}

bool Terrain::cell_flag(const std::vector<uint8_t>& m, double x, double y) const {
  if (m.empty()) return false;
  if (!in_bounds(x, y)) return false;
  int ix = std::min(static_cast<int>(x / cell), nx - 2);
  int iy = std::min(static_cast<int>(y / cell), ny - 2);
  if (ix < 0 || iy < 0) return false;
  return m[ix * (ny - 1) + iy] != 0;
}

double Terrain::friction_at(double x, double y) const {
  x = clamp(x, 0.0, width());
  y = clamp(y, 0.0, depth());
  int ix = std::min(static_cast<int>(x / cell), nx - 2);
  int iy = std::min(static_cast<int>(y / cell), ny - 2);
  ix = std::max(ix, 0);
  iy = std::max(iy, 0);
  return friction[ix * (ny - 1) + iy];
}

bool Terrain::board_at(double x, double y) const { return cell_flag(board_mask, x, y); }
bool Terrain::gap_at(double x, double y) const { return cell_flag(gap_mask, x, y); }

namespace {

Terrain make_blank(double width, double depth, double cell, double friction) {
  Terrain t;
  t.cell = cell;
  t.nx = static_cast<int>(std::round(width / cell)) + 1;
  t.ny = static_cast<int>(std::round(depth / cell)) + 1;
  if (t.nx < 2 || t.ny < 2) throw std::invalid_argument("terrain dimensions must be positive");
  t.height.assign(static_cast<size_t>(t.nx) * t.ny, 0.0);
  t.friction.assign(static_cast<size_t>(t.nx - 1) * (t.ny - 1), friction);
  return t;
}

// Oriented-rectangle overlap via separating axes.
bool rects_overlap(const Obstacle& a, const Obstacle& b) {
  auto corners = [](const Obstacle& o) {
    Vec2 half = o.footprint_half();
    double cx = 0;
    if (o.kind == ObstacleKind::kWeavePoles) cx = half.x() - kPoleRadius;
    std::vector<Vec2> c;
    for (double sx : {-1.0, 1.0})
      for (double sy : {-1.0, 1.0})
        c.push_back(o.to_world({cx + sx * half.x(), sy * half.y()}));
    return c;
  };
  auto axes = [](const Obstacle& o) {
    const double cy = std::cos(o.yaw), sy = std::sin(o.yaw);
    return std::vector<Vec2>{{cy, sy}, {-sy, cy}};
  };
  const auto ca = corners(a), cb = corners(b);
  auto separated = [&](const Vec2& axis) {
    double alo = 1e18, ahi = -1e18, blo = 1e18, bhi = -1e18;
    for (const auto& p : ca) {
      double d = p.dot(axis);
      alo = std::min(alo, d);
      ahi = std::max(ahi, d);
    }
    for (const auto& p : cb) {
      double d = p.dot(axis);
      blo = std::min(blo, d);
      bhi = std::max(bhi, d);
    }
    return ahi < blo || bhi < alo;
  };
  for (const auto& ax : axes(a))
    if (separated(ax)) return false;
  for (const auto& ax : axes(b))
    if (separated(ax)) return false;
  return true;
}

void rasterize(const Obstacle& o, Terrain& t) {
  const Vec2 half = o.footprint_half();
  switch (o.kind) {
    case ObstacleKind::kStartTable:
    case ObstacleKind::kEndTable:
      for (int ix = 0; ix < t.nx; ++ix)
        for (int iy = 0; iy < t.ny; ++iy) {
          Vec2 l = o.to_local({ix * t.cell, iy * t.cell});
          if (std::abs(l.x()) <= kTableHalf && std::abs(l.y()) <= kTableHalf)
            t.h(ix, iy) = std::max(t.h(ix, iy), kTableHeight);
        }
      break;
    case ObstacleKind::kAFrame: {
      const double e = aframe_half_extent();
      for (int ix = 0; ix < t.nx; ++ix)
        for (int iy = 0; iy < t.ny; ++iy) {
          Vec2 l = o.to_local({ix * t.cell, iy * t.cell});
          if (std::abs(l.x()) <= e && std::abs(l.y()) <= kAFrameHalfWidth) {
            double hgt = kAFrameApexHeight * (1.0 - std::abs(l.x()) / e);
            t.h(ix, iy) = std::max(t.h(ix, iy), hgt);
          }
        }
      // Artificial-turf ramp faces get their own friction.
      for (int ix = 0; ix < t.nx - 1; ++ix)
        for (int iy = 0; iy < t.ny - 1; ++iy) {
          Vec2 l = o.to_local({(ix + 0.5) * t.cell, (iy + 0.5) * t.cell});
          if (std::abs(l.x()) <= e && std::abs(l.y()) <= kAFrameHalfWidth)
            t.friction[ix * (t.ny - 1) + iy] = 0.9;
        }
      break;
    }
    case ObstacleKind::kBroadJump:
      // Flush with the floor: no height change. Cells are flagged both as
      // board (contact scoring) and gap (sensed as -1, like a real gap).
      for (int ix = 0; ix < t.nx - 1; ++ix)
        for (int iy = 0; iy < t.ny - 1; ++iy) {
          Vec2 l = o.to_local({(ix + 0.5) * t.cell, (iy + 0.5) * t.cell});
          if (std::abs(l.x()) <= kBoardHalfLength && std::abs(l.y()) <= kBoardHalfWidth) {
            t.board_mask[ix * (t.ny - 1) + iy] = 1;
            t.gap_mask[ix * (t.ny - 1) + iy] = 1;
          }
        }
      break;
    case ObstacleKind::kWeavePoles:
      break;  // collision-free markers
    default:
      (void)half;
      break;
  }
}

}  // namespace

CourseLayout CourseLayout::barkour_default() {
  CourseLayout l;
  l.obstacles = {
      {"start_table", 0.7, 0.7, 0.0, {}},
      {"weave_poles", 0.7, 1.6, kPi / 2, {0.65, 0.65, 0.65, 0.65}},
      {"a_frame", 2.8, 4.2, 0.0, {}},
      {"broad_jump", 4.2, 2.5, -kPi / 2, {}},
      {"end_table", 4.2, 0.7, 0.0, {}},
  };
  return l;
}

CourseLayout CourseLayout::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open layout file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError("layout parse error: " + std::string(e.what()));
  }
  CourseLayout l;
  if (j.contains("area")) {
    l.width = j["area"].value("width", 5.0);
    l.depth = j["area"].value("depth", 5.0);
  }
  l.v_target = j.value("v_target", 1.69);
  for (const auto& o : j.at("obstacles")) {
    Entry e;
    e.kind = o.at("kind").get<std::string>();
    e.x = o.at("x").get<double>();
    e.y = o.at("y").get<double>();
    e.yaw = o.value("yaw", 0.0);
    if (o.contains("pole_spacing")) e.pole_spacing = o["pole_spacing"].get<std::vector<double>>();
    l.obstacles.push_back(std::move(e));
  }
  return l;
}

std::string CourseLayout::to_json() const {
  json j;
  j["area"] = {{"width", width}, {"depth", depth}};
  j["v_target"] = v_target;
  j["obstacles"] = json::array();
  for (const auto& e : obstacles) {
    json o = {{"kind", e.kind}, {"x", e.x}, {"y", e.y}, {"yaw", e.yaw}};
    if (!e.pole_spacing.empty()) o["pole_spacing"] = e.pole_spacing;
    j["obstacles"].push_back(o);
  }
  return j.dump(2);
}

void CourseLayout::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write layout file: " + path);
  out << to_json() << "\n";
}

std::pair<Course, Terrain> build_barkour_course(const CourseLayout& layout, double cell) {
  Course course;
  course.width = layout.width;
  course.depth = layout.depth;
  course.v_target = layout.v_target;
  if (course.v_target <= 0) throw std::invalid_argument("v_target must be positive");

  for (const auto& e : layout.obstacles) {
    Obstacle o;
    o.kind = obstacle_kind_from_string(e.kind);
    o.x = e.x;
    o.y = e.y;
    o.yaw = e.yaw;
    if (o.kind == ObstacleKind::kWeavePoles) {
      o.pole_spacing = e.pole_spacing.empty()
                           ? std::vector<double>(kNumPoles - 1, 0.65)
                           : e.pole_spacing;
      if (o.pole_spacing.size() != kNumPoles - 1)
        throw std::invalid_argument("weave poles need 4 spacings");
      for (double s : o.pole_spacing)
        if (s < 0.5 || s > 0.8)
          throw std::invalid_argument("pole spacing outside [0.5, 0.8] m");
    }
    o.nominal_size = nominal_size_for(o.kind);
    course.obstacles.push_back(std::move(o));
  }

  if (course.obstacles.empty() ||
      course.obstacles.front().kind != ObstacleKind::kStartTable ||
      course.obstacles.back().kind != ObstacleKind::kEndTable)
    throw std::invalid_argument("course must start with start_table and end with end_table");

  // Every footprint must lie inside the area.
  for (const auto& o : course.obstacles) {
    Vec2 half = o.footprint_half();
    double cx = o.kind == ObstacleKind::kWeavePoles ? half.x() - kPoleRadius : 0.0;
    for (double sx : {-1.0, 1.0})
      for (double sy : {-1.0, 1.0}) {
        Vec2 c = o.to_world({cx + sx * half.x(), sy * half.y()});
        if (c.x() < 0 || c.y() < 0 || c.x() > course.width || c.y() > course.depth)
          throw std::invalid_argument(to_string(o.kind) + " extends outside the course area");
      }
  }
  for (size_t i = 0; i < course.obstacles.size(); ++i)
    for (size_t j = i + 1; j < course.obstacles.size(); ++j)
      if (rects_overlap(course.obstacles[i], course.obstacles[j]))
        throw std::invalid_argument("obstacles overlap: " + to_string(course.obstacles[i].kind) +
                                    " and " + to_string(course.obstacles[j].kind));

  Terrain t = make_blank(course.width, course.depth, cell, 1.0);
  t.board_mask.assign(static_cast<size_t>(t.nx - 1) * (t.ny - 1), 0);
  t.gap_mask.assign(static_cast<size_t>(t.nx - 1) * (t.ny - 1), 0);
  for (const auto& o : course.obstacles) rasterize(o, t);
  t.generator_kind = "barkour_course";
  return {std::move(course), std::move(t)};
}

std::string to_string(TerrainKind k) {
  switch (k) {
    case TerrainKind::kFlat: return "flat";
    case TerrainKind::kSlope: return "slope";
    case TerrainKind::kStairs: return "stairs";
    case TerrainKind::kRandomSteps: return "random_steps";
    case TerrainKind::kGaps: return "gaps";
  }
  return "?";
}

TerrainKind terrain_kind_from_string(const std::string& s) {
  if (s == "flat") return TerrainKind::kFlat;
  if (s == "slope") return TerrainKind::kSlope;
  if (s == "stairs") return TerrainKind::kStairs;
  if (s == "random_steps") return TerrainKind::kRandomSteps;
  if (s == "gaps") return TerrainKind::kGaps;
  throw SchemaError("unknown terrain kind: " + s);
}

Terrain build_training_terrain(TerrainKind kind, const TerrainParams& p,
                               uint64_t seed, double cell) {
  if (p.width <= 0 || p.depth <= 0)
    throw std::invalid_argument("terrain dimensions must be positive");
  Rng rng = Rng::substream(seed, "terrain." + to_string(kind));
  Terrain t = make_blank(p.width, p.depth, cell, p.friction);
  t.generator_kind = to_string(kind);
  t.seed = seed;

  // The first 1.5 m along x stays flat so the robot always spawns level.
  const double spawn_pad = 1.5;

  switch (kind) {
    case TerrainKind::kFlat:
      break;
    case TerrainKind::kSlope: {
      double x0 = spawn_pad;
      for (int hcount = 0; hcount < p.hill_count && x0 < p.width; ++hcount) {
        const double incline = rng.uniform(p.slope_incline_lo, p.slope_incline_hi);
        const double run = p.hill_height / std::tan(incline);
        const double apex = x0 + run;
        const double end = apex + run;
        for (int ix = 0; ix < t.nx; ++ix) {
          const double x = ix * cell;
          double hgt = 0;
          if (x > x0 && x < apex) hgt = (x - x0) * std::tan(incline);
          else if (x >= apex && x < end) hgt = (end - x) * std::tan(incline);
          if (hgt > 0)
            for (int iy = 0; iy < t.ny; ++iy) t.h(ix, iy) = std::max(t.h(ix, iy), hgt);
        }
        x0 = end + 1.0;
      }
      break;
    }
    case TerrainKind::kStairs: {
      // Up then down; each tread p.stair_tread deep, heights drawn per step.
      double x0 = spawn_pad;
      std::vector<double> rises;
      for (int i = 0; i < p.stair_count; ++i)
        rises.push_back(rng.uniform(p.step_height_lo, p.step_height_hi));
      double level = 0;
      auto paint = [&](double from, double to, double hgt) {
        for (int ix = 0; ix < t.nx; ++ix) {
          const double x = ix * cell;
          if (x >= from && x < to)
            for (int iy = 0; iy < t.ny; ++iy) t.h(ix, iy) = hgt;
        }
      };
      for (int i = 0; i < p.stair_count; ++i) {
        level += rises[i];
        paint(x0 + i * p.stair_tread, x0 + (i + 1) * p.stair_tread, level);
      }
      const double top_end = x0 + p.stair_count * p.stair_tread + 1.0;
      paint(x0 + p.stair_count * p.stair_tread, top_end, level);
      for (int i = 0; i < p.stair_count; ++i) {
        level -= rises[p.stair_count - 1 - i];
        paint(top_end + i * p.stair_tread, top_end + (i + 1) * p.stair_tread, level);
      }
      break;
    }
    case TerrainKind::kRandomSteps: {
      const int tiles_x = std::max(1, static_cast<int>(p.width / p.tile_size));
      const int tiles_y = std::max(1, static_cast<int>(p.depth / p.tile_size));
      for (int tx = 0; tx < tiles_x; ++tx) {
        for (int ty = 0; ty < tiles_y; ++ty) {
          const double hgt = rng.uniform(p.step_height_lo, p.step_height_hi);
          const double x0 = tx * p.tile_size, y0 = ty * p.tile_size;
          if (x0 + p.tile_size <= spawn_pad) continue;
          for (int ix = 0; ix < t.nx; ++ix) {
            const double x = ix * cell;
            if (x < spawn_pad || x < x0 || x >= x0 + p.tile_size) continue;
            for (int iy = 0; iy < t.ny; ++iy) {
              const double y = iy * cell;
              if (y >= y0 && y < y0 + p.tile_size) t.h(ix, iy) = hgt;
            }
          }
        }
      }
      break;
    }
    case TerrainKind::kGaps: {
      t.gap_mask.assign(static_cast<size_t>(t.nx - 1) * (t.ny - 1), 0);
      double x0 = spawn_pad + 1.0;
      for (int g = 0; g < p.gap_count && x0 < p.width - 1.0; ++g) {
        const double w = p.gap_width_fixed ? *p.gap_width_fixed
                                           : rng.uniform(p.gap_width_lo, p.gap_width_hi);
        for (int ix = 0; ix < t.nx; ++ix) {
          const double x = ix * cell;
          if (x >= x0 && x <= x0 + w)
            for (int iy = 0; iy < t.ny; ++iy) t.h(ix, iy) = -1.0;
        }
        for (int ix = 0; ix < t.nx - 1; ++ix) {
          const double x = (ix + 0.5) * cell;
          if (x >= x0 && x <= x0 + w)
            for (int iy = 0; iy < t.ny - 1; ++iy) t.gap_mask[ix * (t.ny - 1) + iy] = 1;
        }
        x0 += w + p.gap_spacing;
      }
      break;
    }
  }
  for (double hv : t.height)
    if (!std::isfinite(hv)) throw SimulationFault("non-finite terrain height");
  return t;
}

double allotted_time_for(double nominal_size, double v_target) {
  // Truncated (not rounded) to 0.01 s; the small epsilon guards against
  // 354.999999... style floating-point artifacts at exact boundaries.
  const double cs = std::floor(nominal_size / v_target * 100.0 + 1e-9);
  return cs / 100.0;
}

double allotted_time(const Course& course) {
  double total = 0;
  for (const auto& o : course.obstacles) total += allotted_time_for(o.nominal_size, course.v_target);
  return total;
}

}  // namespace barkour
