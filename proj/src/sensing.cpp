#include "barkour/sensing.hpp"

namespace barkour {

HeightfieldSpec HeightfieldSpec::centered_grid() { return {}; }

HeightfieldSpec HeightfieldSpec::forward_strip() {
  HeightfieldSpec s;
  s.rows = 21;
  s.cols = 5;
  s.anchor = Anchor::kForwardStrip;
  return s;
}

std::vector<Vec2> HeightfieldSpec::local_offsets() const {
  if (spacing <= 0 || rows <= 0 || cols <= 0)
    throw std::invalid_argument("heightfield spec must have positive dimensions");
  std::vector<Vec2> out;
  out.reserve(static_cast<size_t>(rows) * cols);
  const double y0 = -0.5 * (cols - 1) * spacing;
  const double x0 = anchor == Anchor::kCenteredOnCom ? -0.5 * (rows - 1) * spacing : 0.0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out.emplace_back(x0 + r * spacing, y0 + c * spacing);
  return out;
}

std::vector<double> heightfield_sample(const Terrain& terrain, const Vec3& base_p,
                                       double yaw, const HeightfieldSpec& spec) {
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  std::vector<double> grid;
  grid.reserve(spec.cells());
  for (const Vec2& l : spec.local_offsets()) {
    const double wx = base_p.x() + cy * l.x() - sy * l.y();
    const double wy = base_p.y() + sy * l.x() + cy * l.y();
    if (terrain.gap_at(wx, wy)) {
      grid.push_back(-1.0);
      continue;
    }
    grid.push_back(terrain.height_at_clamped(wx, wy) - base_p.z());
  }
  return grid;
}

ProprioSample proprio(const RobotState& state) {
  ProprioSample s;
  s.gravity = state.gravity_body();
  s.q = state.q;
  s.yaw_rate = state.omega_body().z();
  return s;
}

std::vector<ProprioSample> ProprioBuffer::window() const {
  if (samples_.empty())
    throw std::invalid_argument("proprio buffer is empty; push at least one sample");
  std::vector<ProprioSample> out;
  out.reserve(kHistorySteps);
  const int pad = kHistorySteps - static_cast<int>(samples_.size());
  for (int i = 0; i < pad; ++i) out.push_back(samples_.front());
  for (const auto& s : samples_) out.push_back(s);
  return out;
}

std::vector<double> assemble_observation(const ProprioBuffer& buffer, const Vec3& command,
                                         const std::vector<std::vector<double>>& heightfields,
                                         const Vec12& last_action, const ObservationSpec& spec,
                                         const NoiseConfig& noise, Rng& rng) {
  if (heightfields.size() != spec.heightfields.size())
    throw std::invalid_argument("heightfield count does not match the observation spec");
  std::vector<double> obs;
  obs.reserve(spec.length());

  obs.push_back(command.x());
  obs.push_back(command.y());
  obs.push_back(command.z());

  double tmp[kProprioDim];
  for (const auto& s : buffer.window()) {
    ProprioSample n = s;
    if (noise.enabled) {
      for (int i = 0; i < 3; ++i) n.gravity[i] += noise.sigma_gravity * rng.normal();
      for (int j = 0; j < kNumJoints; ++j) n.q[j] += noise.sigma_joints * rng.normal();
      n.yaw_rate += noise.sigma_yaw_rate * rng.normal();
    }
    n.write(tmp);
    obs.insert(obs.end(), tmp, tmp + kProprioDim);
  }

  for (size_t i = 0; i < heightfields.size(); ++i) {
    if (static_cast<int>(heightfields[i].size()) != spec.heightfields[i].cells())
      throw std::invalid_argument("heightfield size does not match its spec");
    for (double v : heightfields[i])
      obs.push_back(noise.enabled ? v + noise.sigma_heightfield * rng.normal() : v);
  }

  for (int j = 0; j < kActionDim; ++j) obs.push_back(last_action[j]);
  return obs;
}

}  // namespace barkour
