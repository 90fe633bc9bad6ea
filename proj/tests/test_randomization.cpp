#include <doctest.h>

#include "barkour/randomization.hpp"

using namespace barkour;

TEST_CASE("sampling is deterministic per seed and stays in range") {
  RandomizationRanges r;
  Rng a(17), b(17);
  const DomainParams pa = sample_domain(r, a);
  const DomainParams pb = sample_domain(r, b);
  CHECK(pa.payload_mass == pb.payload_mass);
  CHECK(pa.ground_friction == pb.ground_friction);
  CHECK(pa.kp == pb.kp);

  Rng rng(3);
  double fmin = 1e9, fmax = -1e9;
  for (int i = 0; i < 10000; ++i) {
    const DomainParams p = sample_domain(r, rng);
    CHECK(p.payload_mass >= 2.0);
    CHECK(p.payload_mass <= 6.5);
    CHECK(p.inertia_scale >= 0.40);
    CHECK(p.inertia_scale <= 1.65);
    CHECK(p.kick_magnitude >= 0.0);
    CHECK(p.kick_magnitude <= 1.0);
    CHECK(p.kp >= 15.0);
    CHECK(p.kp <= 20.0);
    CHECK(p.kd >= 0.5);
    CHECK(p.kd <= 0.75);
    CHECK(p.joint_static_friction >= 0.0);
    CHECK(p.joint_static_friction <= 0.7);
    fmin = std::min(fmin, p.ground_friction);
    fmax = std::max(fmax, p.ground_friction);
  }
  CHECK(fmin >= 0.5);
  CHECK(fmax <= 1.25);
  // The draws actually cover the range.
  CHECK(fmin < 0.52);
  CHECK(fmax > 1.23);
}

TEST_CASE("degenerate range always returns its single value") {
  RandomizationRanges r = RandomizationRanges::identity();
  r.ground_friction = {0.77, 0.77};
  Rng rng(1);
  for (int i = 0; i < 100; ++i)
    CHECK(sample_domain(r, rng).ground_friction == 0.77);
}

TEST_CASE("apply: identity keeps the model, draws modify it in range") {
  RobotModel base;
  Rng rng(5);
  const DomainParams id = sample_domain(RandomizationRanges::identity(), rng);
  const RobotModel same = apply_domain(id, base);
  CHECK(same.torso_mass == base.torso_mass);
  CHECK(same.torso_inertia.isApprox(base.torso_inertia));
  CHECK(same.kp == base.kp);

  DomainParams p;
  p.inertia_scale = 1.65;
  p.payload_mass = 6.5;
  const RobotModel randomized = apply_domain(p, base);
  CHECK(randomized.torso_inertia.isApprox(base.torso_inertia * 1.65));
  CHECK(randomized.torso_mass == doctest::Approx(18.0));  // 11.5 + 6.5

  // apply o sample never violates the model invariants.
  RandomizationRanges full;
  for (int i = 0; i < 1000; ++i) {
    const RobotModel m = apply_domain(sample_domain(full, rng), base);
    CHECK(m.torso_mass > 0);
    Eigen::LLT<Mat3> llt(m.torso_inertia);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("invalid range throws") {
  RandomizationRanges r;
  r.kp = {21, 15};
  Rng rng(0);
  CHECK_THROWS_AS((void)sample_domain(r, rng), std::invalid_argument);
}

TEST_CASE("velocity kicks: horizontal, magnitude within the drawn bound") {
  DomainParams p;
  p.kick_magnitude = 0.8;
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 k = draw_velocity_kick(p, rng);
    CHECK(k.z() == 0.0);
    CHECK(k.norm() <= 0.8 + 1e-12);
  }
}
