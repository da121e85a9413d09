#include "equiaug/env.hpp"

#include <cmath>

namespace equiaug::env {

namespace {

scalar_t clip(scalar_t x, scalar_t lo, scalar_t hi) { return std::min(std::max(x, lo), hi); }

}  // namespace

Vector point_mass_step(const Vector& s, const Vector& a, const PointMassParams& p) {
  require(s.size() == 4, "point_mass_step: state must have 4 entries");
  require(a.size() == 2, "point_mass_step: action must have 2 entries");
  require(s.allFinite(), "point_mass_step: non-finite state");

  Vector out(4);
  for (int i = 0; i < 2; ++i) {
    const scalar_t ai = clip(a[i], -1.0, 1.0);
    const scalar_t v = clip(s[2 + i] + p.action_gain * ai * p.dt, -p.max_speed, p.max_speed);
    out[2 + i] = v;
    out[i] = s[i] + v * p.dt;  // semi-implicit Euler, free plane
  }
  return out;
}

Vector reacher_step(const Vector& s, const Vector& a, const ReacherParams& p) {
  require(s.size() == 4, "reacher_step: state must have 4 entries");
  require(a.size() == 2, "reacher_step: action must have 2 entries");
  require(s.allFinite(), "reacher_step: non-finite state");

  const scalar_t c2 = std::cos(s[1]);
  const scalar_t s2 = std::sin(s[1]);
  const scalar_t w1 = s[2];
  const scalar_t w2 = s[3];

  // Point masses at the link tips: M depends on the wrist angle only.
  const scalar_t alpha = (p.m1 + p.m2) * p.l1 * p.l1;
  const scalar_t beta = p.m2 * p.l1 * p.l2;
  const scalar_t gamma = p.m2 * p.l2 * p.l2;

  Eigen::Matrix2d inertia;
  inertia << alpha + gamma + 2.0 * beta * c2, gamma + beta * c2,
             gamma + beta * c2, gamma;
  // det = m2 l1^2 l2^2 (m1 + m2 sin^2 theta2) > 0 for positive masses.
  if (!(inertia.determinant() > 0.0))
    throw NumericalError("reacher_step: singular mass matrix");

  Eigen::Vector2d coriolis;
  coriolis << -beta * s2 * (2.0 * w1 * w2 + w2 * w2), beta * s2 * w1 * w1;

  Eigen::Vector2d torque;
  torque << p.torque_gain * clip(a[0], -1.0, 1.0), p.torque_gain * clip(a[1], -1.0, 1.0);

  Eigen::Vector2d omega(w1, w2);
  const Eigen::Vector2d omega_dot = inertia.inverse() * (torque - coriolis - p.damping * omega);

  Vector out(4);
  out[2] = clip(w1 + omega_dot[0] * p.dt, -p.max_omega, p.max_omega);
  out[3] = clip(w2 + omega_dot[1] * p.dt, -p.max_omega, p.max_omega);
  out[0] = s[0] + out[2] * p.dt;  // unwrapped angles
  out[1] = s[1] + out[3] * p.dt;
  return out;
}

scalar_t goal_reward(const Vector& next_state, const Vector& goal, scalar_t tolerance) {
  require(tolerance > 0.0, "goal_reward: tolerance must be positive");
  require(goal.size() <= next_state.size(), "goal_reward: goal wider than state");
  const scalar_t dist = (next_state.head(goal.size()) - goal).norm();
  return dist < tolerance ? 1.0 : 0.0;
}

Vector apply_region_noise(const Vector& next_state, const NoiseRegion& region, Rng& rng) {
  require(region.amplitude >= 0.0, "apply_region_noise: amplitude must be >= 0");
  require(region.dim >= 0 && region.dim < next_state.size(),
          "apply_region_noise: predicate dimension out of range");
  if (next_state[region.dim] <= region.threshold) return next_state;
  Vector out = next_state;
  for (index_t i = 0; i < out.size(); ++i)
    out[i] += rng.uniform(-region.amplitude, region.amplitude);
  return out;
}

Environment Environment::point_mass(PointMassParams p, scalar_t tolerance) {
  Environment e;
  e.kind_ = EnvKind::point_mass;
  e.tag_ = "point_mass";
  e.pm_ = p;
  e.tolerance_ = tolerance;
  return e;
}

Environment Environment::reacher(ReacherParams p, scalar_t tolerance) {
  Environment e;
  e.kind_ = EnvKind::reacher;
  e.tag_ = "reacher";
  e.rc_ = p;
  e.tolerance_ = tolerance;
  return e;
}

Environment Environment::from_tag(const std::string& tag) {
  if (tag == "point_mass") return point_mass();
  if (tag == "reacher") return reacher();
  throw std::invalid_argument("unknown environment tag: " + tag);
}

Vector Environment::step(const Vector& s, const Vector& a) const {
  return kind_ == EnvKind::point_mass ? point_mass_step(s, a, pm_) : reacher_step(s, a, rc_);
}

scalar_t Environment::reward(const Vector& next_state, const Vector& goal) const {
  return goal_reward(next_state, goal, tolerance_);
}

Vector Environment::sample_initial_state(Rng& rng) const {
  Vector s = Vector::Zero(4);
  if (kind_ == EnvKind::point_mass) {
    s[0] = rng.uniform(-pm_.arena_half_width, pm_.arena_half_width);
    s[1] = rng.uniform(-pm_.arena_half_width, pm_.arena_half_width);
  } else {
    s[0] = rng.uniform(-M_PI, M_PI);
    s[1] = rng.uniform(-M_PI, M_PI);
  }
  return s;
}

std::vector<Vector> Environment::sample_goals(GoalSplit split, int n, Rng& rng) const {
  require(n >= 1, "sample_goals: n must be >= 1");
  std::vector<Vector> goals;
  goals.reserve(n);
  for (int i = 0; i < n; ++i) {
    Vector g(2);
    if (kind_ == EnvKind::point_mass) {
      if (split == GoalSplit::train) {
        g.setZero();
      } else {
        g[0] = rng.uniform(-pm_.arena_half_width, pm_.arena_half_width);
        g[1] = rng.uniform(-pm_.arena_half_width, pm_.arena_half_width);
      }
    } else {
      const scalar_t half = split == GoalSplit::train ? M_PI / 4.0 : M_PI;
      g[0] = rng.uniform(-half, half);
      g[1] = rng.uniform(-half, half);
    }
    goals.push_back(std::move(g));
  }
  return goals;
}

}  // namespace equiaug::env
