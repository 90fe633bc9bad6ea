#include <doctest.h>

#include "barkour/sensing.hpp"

using namespace barkour;

namespace {
Terrain flat10() {
  TerrainParams p;
  p.width = 10;
  p.depth = 10;
  return build_training_terrain(TerrainKind::kFlat, p, 0);
}
}  // namespace

TEST_CASE("heightfield: flat terrain reads -torso height everywhere") {
  Terrain t = flat10();
  auto g = heightfield_sample(t, {5, 5, 0.30}, 0.4, HeightfieldSpec::centered_grid());
  CHECK(g.size() == 187);  // 17 x 11
  for (double v : g) CHECK(v == doctest::Approx(-0.30));
}

TEST_CASE("heightfield: invariant under joint translation and yaw of robot+terrain") {
  // Random-steps terrain; translating the query within the same terrain is
  // equivalent to translating both robot and world when heights repeat.
  TerrainParams p;
  Terrain t = build_training_terrain(TerrainKind::kRandomSteps, p, 13);
  const auto spec = HeightfieldSpec::centered_grid();

  // Relative sampling: raising the terrain OR lowering the torso by the same
  // amount leaves grid differences unchanged.
  auto a = heightfield_sample(t, {5, 5, 0.30}, 0.0, spec);
  Terrain raised = t;
  for (auto& h : raised.height) h += 0.25;
  auto b = heightfield_sample(raised, {5, 5, 0.55}, 0.0, spec);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));

  // Yaw alignment: rotating the robot about its own axis re-samples the same
  // world cells under the inverse grid rotation; on flat ground the grid is
  // unchanged for any yaw.
  Terrain flat = flat10();
  auto g0 = heightfield_sample(flat, {5, 5, 0.3}, 0.0, spec);
  auto g1 = heightfield_sample(flat, {5, 5, 0.3}, 1.1, spec);
  for (size_t i = 0; i < g0.size(); ++i) CHECK(g0[i] == doctest::Approx(g1[i]));
}

TEST_CASE("heightfield: marked gap cells read exactly -1") {
  TerrainParams p;
  p.gap_width_fixed = 0.6;
  p.gap_count = 1;
  Terrain t = build_training_terrain(TerrainKind::kGaps, p, 1);
  // Find the gap and stand right before it.
  double gx = -1;
  for (double x = 0; x < t.width(); x += t.cell)
    if (t.gap_at(x, 2.0)) {
      gx = x;
      break;
    }
  REQUIRE(gx > 0);
  auto spec = HeightfieldSpec::forward_strip();
  auto g = heightfield_sample(t, {gx - 0.3, 2.0, 0.30}, 0.0, spec);
  int minus_ones = 0;
  for (double v : g) {
    if (v == -1.0) ++minus_ones;
  }
  CHECK(minus_ones > 0);
}

TEST_CASE("proprio: projected gravity and yaw rate conventions") {
  RobotState s;
  auto pr = proprio(s);
  CHECK(pr.gravity.isApprox(Vec3(0, 0, -1)));

  s.orientation = Quat(Eigen::AngleAxisd(kPi / 2, Vec3::UnitX()));  // roll 90
  pr = proprio(s);
  CHECK(pr.gravity.isApprox(Vec3(0, -1, 0), 1e-12));

  s.orientation = Quat::Identity();
  s.omega = {0, 0, 1.0};
  pr = proprio(s);
  CHECK(pr.yaw_rate == doctest::Approx(1.0));
}

TEST_CASE("assemble_observation: layout, padding, determinism") {
  Terrain t = flat10();
  ObservationSpec spec;
  spec.heightfields = {HeightfieldSpec::centered_grid()};
  CHECK(spec.length() == 3 + 15 * 16 + 187 + 12);

  ProprioBuffer buf;
  RobotState s;
  s.p = {5, 5, 0.3};
  buf.push(proprio(s));

  auto hf = heightfield_sample(t, s.p, 0.0, spec.heightfields[0]);
  Rng rng(0);
  Vec12 last = Vec12::Constant(0.25);
  auto obs = assemble_observation(buf, {1.0, 0.0, 0.0}, {hf}, last, spec, {}, rng);
  REQUIRE(static_cast<int>(obs.size()) == spec.length());
  CHECK(obs[0] == 1.0);

  // One-step-old episode: history is the first sample repeated 15 times.
  for (int k = 0; k < 15; ++k) {
    const int base = 3 + k * kProprioDim;
    CHECK(obs[base + 2] == doctest::Approx(-1.0));  // gravity z
    CHECK(obs[base + 3] == doctest::Approx(s.q[0]));
  }
  // Last action sits at the tail.
  CHECK(obs[obs.size() - 1] == doctest::Approx(0.25));

  // Noise off: repeated call gives an identical vector.
  Rng rng2(99);
  auto obs2 = assemble_observation(buf, {1.0, 0.0, 0.0}, {hf}, last, spec, {}, rng2);
  CHECK(obs == obs2);

  // Noise on: perturbs channels.
  NoiseConfig noise;
  noise.enabled = true;
  noise.sigma_joints = 0.01;
  auto obs3 = assemble_observation(buf, {1.0, 0.0, 0.0}, {hf}, last, spec, noise, rng);
  CHECK(obs != obs3);
}

TEST_CASE("observation length is constant across an episode") {
  Terrain t = flat10();
  ObservationSpec spec;
  spec.heightfields = {HeightfieldSpec::forward_strip()};
  ProprioBuffer buf;
  RobotState s;
  s.p = {5, 5, 0.3};
  Rng rng(0);
  size_t len = 0;
  for (int step = 0; step < 40; ++step) {
    buf.push(proprio(s));
    auto hf = heightfield_sample(t, s.p, 0.0, spec.heightfields[0]);
    auto obs = assemble_observation(buf, Vec3::Zero(), {hf}, Vec12::Zero(), spec, {}, rng);
    if (step == 0) len = obs.size();
    CHECK(obs.size() == len);
  }
  CHECK(static_cast<int>(len) == spec.length());
}
