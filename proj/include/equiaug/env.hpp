#pragma once

#include <string>
#include <vector>

#include "equiaug/rng.hpp"
#include "equiaug/types.hpp"

namespace equiaug::env {

enum class EnvKind { point_mass, reacher };
enum class GoalSplit { train, test };

/// Free-plane double integrator. State (x, y, vx, vy), action = acceleration
/// command in [-1,1]^2.
struct PointMassParams {
  scalar_t dt = 0.05;
  scalar_t action_gain = 1.0;
  scalar_t max_speed = 2.0;
  scalar_t arena_half_width = 1.0;
};

/// Gravity-free two-link arm, point masses at the link tips. State
/// (theta_shoulder, theta_wrist, omega_shoulder, omega_wrist), action =
/// joint torques in [-1,1]^2. Angles are kept unwrapped.
struct ReacherParams {
  scalar_t dt = 0.02;
  scalar_t l1 = 0.5;
  scalar_t l2 = 0.5;
  scalar_t m1 = 1.0;
  scalar_t m2 = 1.0;
  scalar_t damping = 0.1;
  scalar_t torque_gain = 1.0;
  scalar_t max_omega = 8.0;
};

struct NoiseRegion {
  int dim = 0;            // state coordinate the predicate reads
  scalar_t threshold = 0.0;
  scalar_t amplitude = 0.1;
};

Vector point_mass_step(const Vector& s, const Vector& a, const PointMassParams& p);
Vector reacher_step(const Vector& s, const Vector& a, const ReacherParams& p);

/// Sparse reward: 1 when the goal-relevant state block (leading goal_dim
/// coordinates) is within `tolerance` of the goal, else 0.
scalar_t goal_reward(const Vector& next_state, const Vector& goal, scalar_t tolerance);

/// If next_state[dim] > threshold, every coordinate gets independent uniform
/// noise in [-amplitude, amplitude]; otherwise the state is returned as is.
Vector apply_region_noise(const Vector& next_state, const NoiseRegion& region, Rng& rng);

/// Value-semantic environment handle dispatching on kind. Step functions are
/// pure; rollouts may run concurrently with per-episode derived seeds.
class Environment {
 public:
  static Environment point_mass(PointMassParams p = {}, scalar_t tolerance = 0.1);
  static Environment reacher(ReacherParams p = {}, scalar_t tolerance = 0.1);
  static Environment from_tag(const std::string& tag);

  EnvKind kind() const { return kind_; }
  const std::string& tag() const { return tag_; }
  int state_dim() const { return 4; }
  int action_dim() const { return 2; }
  int goal_dim() const { return 2; }
  scalar_t tolerance() const { return tolerance_; }

  const PointMassParams& point_mass_params() const { return pm_; }
  const ReacherParams& reacher_params() const { return rc_; }
  PointMassParams& point_mass_params() { return pm_; }
  ReacherParams& reacher_params() { return rc_; }
  void set_tolerance(scalar_t tol) { tolerance_ = tol; }

  Vector step(const Vector& s, const Vector& a) const;
  scalar_t reward(const Vector& next_state, const Vector& goal) const;

  /// Point mass: positions uniform in the arena, zero velocity.
  /// Reacher: angles uniform in [-pi, pi]^2, zero velocity.
  Vector sample_initial_state(Rng& rng) const;

  /// Point mass: train goals are all (0,0), test goals uniform in the arena.
  /// Reacher: train goals uniform in the [-pi/4, pi/4]^2 wedge, test goals
  /// uniform in [-pi, pi]^2.
  std::vector<Vector> sample_goals(GoalSplit split, int n, Rng& rng) const;

  /// State dimensions the known-symmetry baselines translate (positions for
  /// the point mass, both angles for the reacher). The learned bounds are
  /// never masked with this.
  std::vector<int> translation_mask() const { return {0, 1}; }

 private:
  EnvKind kind_ = EnvKind::point_mass;
  std::string tag_;
  PointMassParams pm_;
  ReacherParams rc_;
  scalar_t tolerance_ = 0.1;
};

}  // namespace equiaug::env
