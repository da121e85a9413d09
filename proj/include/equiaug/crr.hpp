#pragma once

#include <cmath>
#include <span>
#include <utility>

#include "equiaug/dataset.hpp"
#include "equiaug/env.hpp"
#include "equiaug/mlp.hpp"
#include "equiaug/optimizer.hpp"

namespace equiaug::rl {

/// Goal-conditioned Gaussian policy: an MLP maps (s, g) to the action mean;
/// the standard deviation is fixed. Actions are tanh-squashed to [-1,1] at
/// evaluation time; training densities use the unsquashed Gaussian.
struct GaussianPolicy {
  diff::MlpNetwork net;
  scalar_t log_std = std::log(0.1);
  int sdim = 0;
  int gdim = 0;
  int adim = 0;

  scalar_t std() const { return std::exp(log_std); }
};

Vector policy_mean(const GaussianPolicy& p, const Vector& s, const Vector& g);
Matrix policy_mean(const GaussianPolicy& p, const Matrix& states, const Matrix& goals);

/// Deterministic evaluation action: tanh(mean).
Vector policy_action(const GaussianPolicy& p, const Vector& s, const Vector& g);

/// Stochastic action used for the advantage baseline: tanh(mean + std * xi).
Vector policy_sample(const GaussianPolicy& p, const Vector& s, const Vector& g, Rng& rng);

struct QCritic {
  diff::MlpNetwork net;     // (s, a, g) -> scalar
  diff::MlpNetwork target;  // frozen copy, refreshed every target_period steps
  int sdim = 0;
  int adim = 0;
  int gdim = 0;
};

scalar_t critic_value(const diff::MlpNetwork& net, const Vector& s, const Vector& a,
                      const Vector& g);

struct CrrConfig {
  std::vector<int> hidden_dims{64, 64};
  scalar_t discount = 0.99;
  scalar_t temperature = 1.0;  // beta
  int advantage_samples = 4;   // m
  scalar_t weight_clip = 20.0;
  scalar_t policy_lr = 1e-3;
  scalar_t critic_lr = 1e-3;
  int batch_size = 256;
  int gradient_steps = 50000;
  int target_period = 100;
  scalar_t policy_std = 0.1;
  std::uint64_t seed = 0;
  bool behavior_cloning_only = false;  // force unit weights, skip the critic
};

/// r + discount * (1 - done) * q_next.
scalar_t td_target(scalar_t r, bool done, scalar_t q_next, scalar_t discount);

/// min(exp(advantage / temperature), clip).
scalar_t crr_weight(scalar_t advantage, scalar_t temperature, scalar_t clip);

/// Q(s,a,g) minus the mean of Q over m policy samples at (s,g).
scalar_t advantage(const QCritic& critic, const Vector& s, const Vector& a, const Vector& g,
                   const GaussianPolicy& policy, int m, Rng& rng);

struct CrrDiagnostics {
  scalar_t critic_loss = 0.0;
  scalar_t policy_loss = 0.0;
  scalar_t mean_weight = 0.0;
};

/// Optimizer and target-refresh state carried across updates.
struct CrrState {
  diff::Optimizer policy_opt;
  diff::Optimizer critic_opt;
  long critic_updates = 0;
};

/// One gradient step: critic on the mean squared TD error, policy on the
/// advantage-weighted negative log-density of batch actions.
CrrDiagnostics crr_update(GaussianPolicy& policy, QCritic& critic, const data::Dataset& d,
                          std::span<const std::size_t> batch, const CrrConfig& cfg,
                          CrrState& state, Rng& rng);

/// CRR training over cfg.gradient_steps minibatches. Deterministic given
/// cfg.seed.
std::pair<GaussianPolicy, QCritic> train_crr(const data::Dataset& d, const CrrConfig& cfg);

/// Behavior cloning: crr_update with unit weights and no critic.
GaussianPolicy train_bc(const data::Dataset& d, const CrrConfig& cfg);

struct RolloutResult {
  scalar_t episode_return = 0.0;  // sum of rewards / horizon, in [0,1]
  std::vector<Vector> states;     // s_0 .. s_T
};

/// Deterministic-mean rollout; no early termination, so the return measures
/// time at goal.
RolloutResult rollout(const env::Environment& e, const GaussianPolicy& policy,
                      const Vector& goal, int horizon, Rng& rng);

struct SplitReport {
  std::vector<scalar_t> returns;
  scalar_t mean = 0.0;
  scalar_t stderr_mean = 0.0;
};

SplitReport summarize(std::vector<scalar_t> returns);

SplitReport evaluate_split(const env::Environment& e, const GaussianPolicy& policy,
                           env::GoalSplit split, int episodes, int horizon, Rng rng);

struct EvalReport {
  SplitReport train;
  SplitReport test;
  int episodes = 0;
  int horizon = 0;
};

EvalReport evaluate_policy(const env::Environment& e, const GaussianPolicy& policy,
                           int episodes, int horizon, Rng rng);

void save_policy(const GaussianPolicy& p, const std::filesystem::path& path);
GaussianPolicy load_policy(const std::filesystem::path& path);

}  // namespace equiaug::rl
