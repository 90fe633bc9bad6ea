#pragma once

#include "barkour/dynamics.hpp"

namespace barkour {

struct RandomizationRanges {
  struct Range {
    double lo = 0, hi = 0;
    bool valid() const { return lo <= hi; }
  };
  Range payload_mass{2.0, 6.5};        // kg added to the torso
  Range inertia_scale{0.40, 1.65};
  Range kick_magnitude{0.0, 1.0};      // m/s, applied at 10 s intervals
  Range ground_friction{0.5, 1.25};    // multiplies the terrain friction map
  Range kp{15.0, 20.0};
  Range kd{0.5, 0.75};
  Range joint_static_friction{0.0, 0.7};

  static RandomizationRanges identity() {
    RandomizationRanges r;
    r.payload_mass = {0, 0};
    r.inertia_scale = {1, 1};
    r.kick_magnitude = {0, 0};
    r.ground_friction = {1, 1};
    r.kp = {20, 20};
    r.kd = {0.5, 0.5};
    r.joint_static_friction = {0, 0};
    return r;
  }
};

struct DomainParams {
  double payload_mass = 0;
  double inertia_scale = 1;
  double kick_magnitude = 0;  // per-episode bound; each kick draws within it
  double ground_friction = 1;
  double kp = 20;
  double kd = 0.5;
  double joint_static_friction = 0;
};

/// Independent uniform draws, deterministic per RNG state.
DomainParams sample_domain(const RandomizationRanges& ranges, Rng& rng);

/// Returns the randomized model; the friction multiplier and kick schedule
/// are consumed by the environment. Throws if the scaled inertia is not
/// positive definite.
RobotModel apply_domain(const DomainParams& params, const RobotModel& base);

/// Kick applied at each 10 s boundary: uniform direction on the horizontal
/// circle, magnitude uniform within [0, params.kick_magnitude].
Vec3 draw_velocity_kick(const DomainParams& params, Rng& rng);

inline constexpr double kKickIntervalSeconds = 10.0;

}  // namespace barkour
