#pragma once

#include <deque>
#include <vector>

#include "barkour/dynamics.hpp"

namespace barkour {

inline constexpr int kProprioDim = 16;       // g(3) + q(12) + yaw rate(1)
inline constexpr int kHistorySteps = 15;     // 0.3 s at 50 Hz
inline constexpr int kCommandDim = 3;
inline constexpr int kActionDim = 12;

struct HeightfieldSpec {
  enum class Anchor { kCenteredOnCom, kForwardStrip };
  int rows = 17;          // along heading
  int cols = 11;          // lateral
  double spacing = 0.1;   // m
  Anchor anchor = Anchor::kCenteredOnCom;

  int cells() const { return rows * cols; }
  /// Grid offsets in the heading-aligned frame, row-major.
  std::vector<Vec2> local_offsets() const;

  static HeightfieldSpec centered_grid();  // 17 x 11, OWP
  static HeightfieldSpec forward_strip();  // 21 x 5, SCP/JP
};

/// Relative heights w.r.t. the torso center on a heading-aligned grid.
/// Cells over flagged gap cells read exactly -1; cells outside the terrain
/// clamp to the edge height.
std::vector<double> heightfield_sample(const Terrain& terrain, const Vec3& base_p,
                                       double yaw, const HeightfieldSpec& spec);

struct ProprioSample {
  Vec3 gravity = Vec3(0, 0, -1);  // projected gravity, base frame
  Vec12 q = Vec12::Zero();
  double yaw_rate = 0;

  void write(double* out) const {
    out[0] = gravity.x();
    out[1] = gravity.y();
    out[2] = gravity.z();
    for (int j = 0; j < kNumJoints; ++j) out[3 + j] = q[j];
    out[15] = yaw_rate;
  }
};

ProprioSample proprio(const RobotState& state);

/// Fixed-capacity proprioception history; young episodes pad by repeating
/// the first sample.
class ProprioBuffer {
 public:
  void clear() { samples_.clear(); }
  void push(const ProprioSample& s) {
    samples_.push_back(s);
    if (samples_.size() > kHistorySteps) samples_.pop_front();
  }
  bool empty() const { return samples_.empty(); }
  /// Oldest to newest, padded to kHistorySteps entries.
  std::vector<ProprioSample> window() const;

 private:
  std::deque<ProprioSample> samples_;
};

struct NoiseConfig {
  bool enabled = false;
  double sigma_gravity = 0.0;
  double sigma_joints = 0.0;
  double sigma_yaw_rate = 0.0;
  double sigma_heightfield = 0.0;
};

struct ObservationSpec {
  std::vector<HeightfieldSpec> heightfields;
  int heightfield_cells() const {
    int n = 0;
    for (const auto& h : heightfields) n += h.cells();
    return n;
  }
  /// command | proprio history | heightfield(s) | last action
  int length() const {
    return kCommandDim + kHistorySteps * kProprioDim + heightfield_cells() + kActionDim;
  }
};

/// Flattens command, the padded proprio history (oldest first), the supplied
/// heightfield grids, and the previous action into one vector, optionally
/// adding zero-mean Gaussian noise per channel group.
std::vector<double> assemble_observation(const ProprioBuffer& buffer, const Vec3& command,
                                         const std::vector<std::vector<double>>& heightfields,
                                         const Vec12& last_action, const ObservationSpec& spec,
                                         const NoiseConfig& noise, Rng& rng);

}  // namespace barkour
