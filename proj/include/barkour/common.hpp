#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace barkour {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using Vec12 = Eigen::Matrix<double, 12, 1>;

inline constexpr double kGravity = 9.81;
inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a - kPi;
}

inline double clamp(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

/// Deterministic RNG. The engine is std::mt19937_64 (bit-exact by the
/// standard); the distributions are hand-rolled on top of raw bits because
/// std:: distribution algorithms are implementation-defined and would break
/// reproducibility across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  /// Named substream, e.g. Rng::substream(seed, "env.3.terrain").
  static Rng substream(uint64_t root, std::string_view name) {
    // FNV-1a over the name, mixed with the root seed.
    uint64_t h = 1469598103934665603ull;
    for (char c : name) {
      h ^= static_cast<uint8_t>(c);
      h *= 1099511628211ull;
    }
    return Rng(h ^ (root * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull));
  }

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(uniform() * static_cast<double>(hi - lo + 1));
  }

  /// Standard normal via Box-Muller (deterministic, no stashed spare).
  double normal() {
    double u1 = uniform(), u2 = uniform();
    if (u1 <= 0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

 private:
  std::mt19937_64 gen_;
};

struct SimulationFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Roll/pitch/yaw (ZYX convention) from a body-to-world quaternion.
inline Vec3 quat_to_rpy(const Quat& q) {
  const Mat3 r = q.toRotationMatrix();
  const double pitch = std::asin(clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return {roll, pitch, yaw};
}

inline double yaw_of(const Quat& q) {
  const Mat3 r = q.toRotationMatrix();
  return std::atan2(r(1, 0), r(0, 0));
}

/// Integrates a world-frame angular velocity over dt (exact exponential map).
inline Quat integrate_quat(const Quat& q, const Vec3& omega_world, double dt) {
  const double angle = omega_world.norm() * dt;
  if (angle < 1e-12) return q;
  const Vec3 axis = omega_world.normalized();
  Quat dq(Eigen::AngleAxisd(angle, axis));
  return (dq * q).normalized();
}

}  // namespace barkour
