#include "barkour/randomization.hpp"

namespace barkour {

DomainParams sample_domain(const RandomizationRanges& r, Rng& rng) {
  for (const auto* range : {&r.payload_mass, &r.inertia_scale, &r.kick_magnitude,
                            &r.ground_friction, &r.kp, &r.kd, &r.joint_static_friction})
    if (!range->valid()) throw std::invalid_argument("randomization range has lo > hi");
  DomainParams p;
  p.payload_mass = rng.uniform(r.payload_mass.lo, r.payload_mass.hi);
  p.inertia_scale = rng.uniform(r.inertia_scale.lo, r.inertia_scale.hi);
  p.kick_magnitude = rng.uniform(r.kick_magnitude.lo, r.kick_magnitude.hi);
  p.ground_friction = rng.uniform(r.ground_friction.lo, r.ground_friction.hi);
  p.kp = rng.uniform(r.kp.lo, r.kp.hi);
  p.kd = rng.uniform(r.kd.lo, r.kd.hi);
  p.joint_static_friction = rng.uniform(r.joint_static_friction.lo, r.joint_static_friction.hi);
  return p;
}

RobotModel apply_domain(const DomainParams& params, const RobotModel& base) {
  RobotModel m = base;
  m.torso_mass = base.torso_mass + params.payload_mass;
  m.torso_inertia = base.torso_inertia * params.inertia_scale;
  m.kp = params.kp;
  m.kd = params.kd;
  m.joint_static_friction = params.joint_static_friction;
  if (m.torso_mass <= 0) throw std::invalid_argument("randomized mass must be positive");
  Eigen::LLT<Mat3> llt(m.torso_inertia);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("randomized inertia is not positive definite");
  return m;
}

Vec3 draw_velocity_kick(const DomainParams& params, Rng& rng) {
  const double angle = rng.uniform(0, 2 * kPi);
  const double mag = rng.uniform(0, params.kick_magnitude);
  return {mag * std::cos(angle), mag * std::sin(angle), 0.0};
}

}  // namespace barkour
