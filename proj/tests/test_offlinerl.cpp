#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "equiaug/crr.hpp"
#include "equiaug/datagen.hpp"

using namespace equiaug;
using namespace equiaug::rl;

namespace {

data::Dataset pm_dataset(int n_traj, std::uint64_t seed) {
  const env::Environment e = env::Environment::point_mass();
  data::ScriptedControllerParams ctrl;
  return data::collect_dataset(e, ctrl, n_traj, env::GoalSplit::train, Rng(seed));
}

GaussianPolicy zero_policy(scalar_t log_std = std::log(0.1)) {
  GaussianPolicy p;
  p.sdim = 4;
  p.gdim = 2;
  p.adim = 2;
  p.log_std = log_std;
  p.net = diff::mlp_init(6, {8}, 2, 3);
  for (diff::MlpLayer& layer : p.net.layers) layer.w.setZero();
  return p;
}

// Q(s, a, g) = a_0 + a_1, exactly, via a single identity-selecting layer.
QCritic sum_action_critic() {
  QCritic c;
  c.sdim = 4;
  c.adim = 2;
  c.gdim = 2;
  diff::MlpNetwork net;
  net.input_dim = 8;
  net.output_dim = 1;
  diff::MlpLayer layer;
  layer.w = Matrix::Zero(8, 1);
  layer.w(4, 0) = 1.0;
  layer.w(5, 0) = 1.0;
  layer.b = Matrix::Zero(1, 1);
  layer.act = diff::Activation::identity;
  net.layers.push_back(layer);
  c.net = net;
  c.target = net;
  return c;
}

}  // namespace

TEST_CASE("td_target examples") {
  CHECK(td_target(1.0, true, 123.0, 0.99) == 1.0);
  CHECK(td_target(1.0, false, 0.5, 0.99) == doctest::Approx(1.495));
  CHECK(td_target(0.0, false, 0.0, 0.99) == 0.0);
  CHECK_THROWS_AS(td_target(0.5, false, 0.0, 0.99), std::invalid_argument);
}

TEST_CASE("crr_weight: unit at zero advantage, clipped above") {
  CHECK(crr_weight(0.0, 1.0, 20.0) == 1.0);
  CHECK(crr_weight(5.0, 1.0, 20.0) == 20.0);  // e^5 ~ 148.4 clips
  CHECK(crr_weight(1.0, 1.0, 20.0) == doctest::Approx(std::exp(1.0)));

  // Without clipping, the weight ranking is invariant to a constant shift.
  Rng rng(2);
  std::vector<scalar_t> adv(16);
  for (scalar_t& a : adv) a = rng.uniform(-2.0, 2.0);
  const scalar_t inf = std::numeric_limits<scalar_t>::infinity();
  std::size_t best = 0, best_shifted = 0;
  for (std::size_t i = 0; i < adv.size(); ++i) {
    if (crr_weight(adv[i], 1.0, inf) > crr_weight(adv[best], 1.0, inf)) best = i;
    if (crr_weight(adv[i] + 0.7, 1.0, inf) > crr_weight(adv[best_shifted] + 0.7, 1.0, inf))
      best_shifted = i;
  }
  CHECK(best == best_shifted);
}

TEST_CASE("advantage: constant critic gives zero, sum critic recovers the action") {
  Rng rng(5);
  const Vector s = rng.uniform_vector(4, -1.0, 1.0);
  const Vector g = rng.uniform_vector(2, -1.0, 1.0);
  Vector a(2);
  a << 1.0, 1.0;

  QCritic constant;
  constant.sdim = 4;
  constant.adim = 2;
  constant.gdim = 2;
  constant.net = diff::mlp_init(8, {4}, 1, 9);
  for (diff::MlpLayer& layer : constant.net.layers) layer.w.setZero();
  constant.net.layers.back().b.setConstant(0.7);
  constant.target = constant.net;
  const GaussianPolicy pol = zero_policy();
  CHECK(advantage(constant, s, a, g, pol, 8, rng) == doctest::Approx(0.0));

  // Q = sum(a); policy mean 0 with vanishing std: baseline ~ Q(s, 0, g) = 0.
  const QCritic sum_critic = sum_action_critic();
  const GaussianPolicy tight = zero_policy(std::log(1e-9));
  CHECK(advantage(sum_critic, s, a, g, tight, 16, rng) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("crr_update with enormous temperature reproduces behavior cloning") {
  const data::Dataset d = pm_dataset(5, 3);
  std::vector<std::size_t> batch;
  for (std::size_t i = 0; i < 64 && i < d.size(); ++i) batch.push_back(i);

  CrrConfig cfg;
  cfg.hidden_dims = {8};
  cfg.seed = 1;
  cfg.temperature = 1e20;  // exp(A / T) is exactly 1 in double precision

  auto make_policy = [&] {
    GaussianPolicy p;
    p.sdim = 4;
    p.gdim = 2;
    p.adim = 2;
    p.net = diff::mlp_init(6, cfg.hidden_dims, 2, 77);
    return p;
  };
  auto make_critic = [&] {
    QCritic c;
    c.sdim = 4;
    c.adim = 2;
    c.gdim = 2;
    c.net = diff::mlp_init(8, cfg.hidden_dims, 1, 78);
    c.target = c.net;
    return c;
  };

  GaussianPolicy crr_policy = make_policy();
  QCritic critic = make_critic();
  CrrState state1;
  Rng rng1(4);
  crr_update(crr_policy, critic, d, batch, cfg, state1, rng1);

  GaussianPolicy bc_policy = make_policy();
  QCritic unused = make_critic();
  CrrConfig bc_cfg = cfg;
  bc_cfg.behavior_cloning_only = true;
  CrrState state2;
  Rng rng2(4);
  crr_update(bc_policy, unused, d, batch, bc_cfg, state2, rng2);

  for (std::size_t k = 0; k < crr_policy.net.layers.size(); ++k) {
    CHECK(crr_policy.net.layers[k].w == bc_policy.net.layers[k].w);
    CHECK(crr_policy.net.layers[k].b == bc_policy.net.layers[k].b);
  }
}

TEST_CASE("target refresh copies the critic exactly") {
  const data::Dataset d = pm_dataset(5, 9);
  std::vector<std::size_t> batch;
  for (std::size_t i = 0; i < 32; ++i) batch.push_back(i % d.size());

  CrrConfig cfg;
  cfg.hidden_dims = {8};
  cfg.target_period = 3;

  GaussianPolicy policy = zero_policy();
  QCritic critic;
  critic.sdim = 4;
  critic.adim = 2;
  critic.gdim = 2;
  critic.net = diff::mlp_init(8, cfg.hidden_dims, 1, 21);
  critic.target = critic.net;

  CrrState state;
  Rng rng(6);
  for (int step = 0; step < 3; ++step) crr_update(policy, critic, d, batch, cfg, state, rng);
  for (std::size_t k = 0; k < critic.net.layers.size(); ++k) {
    CHECK(critic.target.layers[k].w == critic.net.layers[k].w);
    CHECK(critic.target.layers[k].b == critic.net.layers[k].b);
  }
}

TEST_CASE("train_bc: single repeated transition and determinism") {
  data::Dataset d;
  d.env_tag = "point_mass";
  d.sdim = 4;
  d.adim = 2;
  d.gdim = 2;
  Vector s(4), s2(4), a(2), g(2);
  s << 0.2, -0.1, 0.0, 0.0;
  s2 << 0.21, -0.1, 0.05, 0.0;
  a << 0.4, -0.3;
  g << 0.5, 0.5;
  for (int i = 0; i < 32; ++i)
    d.transitions.push_back({s, a, 0.0, s2, g, false, i, 0, data::Origin::original});

  CrrConfig cfg;
  cfg.hidden_dims = {16};
  cfg.gradient_steps = 2000;
  cfg.batch_size = 32;
  cfg.seed = 5;
  const GaussianPolicy p1 = train_bc(d, cfg);
  CHECK((policy_mean(p1, s, g) - a).cwiseAbs().maxCoeff() < 1e-3);

  const GaussianPolicy p2 = train_bc(d, cfg);
  for (std::size_t k = 0; k < p1.net.layers.size(); ++k)
    CHECK(p1.net.layers[k].w == p2.net.layers[k].w);
}

TEST_CASE("rollout: stationary at goal scores 1, hopeless policy scores 0") {
  const env::Environment e = env::Environment::point_mass();
  const GaussianPolicy hold = zero_policy();  // tanh(0) = 0 action everywhere

  // With zero action and zero initial velocity the mass never moves, so a
  // goal on top of the start collects reward every step.
  Rng rng(3);
  const Vector start = e.sample_initial_state(rng);
  Rng replay(3);  // same stream: rollout samples the same start
  const RolloutResult at_goal = rollout(e, hold, start.head(2), 50, replay);
  CHECK(at_goal.episode_return == 1.0);

  Vector far(2);
  far << 50.0, 50.0;  // unreachable within the horizon
  Rng replay2(3);
  const RolloutResult lost = rollout(e, hold, far, 50, replay2);
  CHECK(lost.episode_return == 0.0);
  CHECK(static_cast<int>(lost.states.size()) == 51);
}

TEST_CASE("rollout return equals the recomputed trajectory statistic") {
  const env::Environment e = env::Environment::point_mass();
  GaussianPolicy p;
  p.sdim = 4;
  p.gdim = 2;
  p.adim = 2;
  p.net = diff::mlp_init(6, {8}, 2, 31);

  Vector goal(2);
  goal << 0.3, -0.2;
  Rng rng(11);
  const int horizon = 40;
  const RolloutResult r = rollout(e, p, goal, horizon, rng);
  REQUIRE(static_cast<int>(r.states.size()) == horizon + 1);
  scalar_t total = 0.0;
  for (int t = 1; t <= horizon; ++t) total += e.reward(r.states[t], goal);
  CHECK(r.episode_return == doctest::Approx(total / horizon));
  CHECK(r.episode_return >= 0.0);
  CHECK(r.episode_return <= 1.0);
}

TEST_CASE("evaluation: deterministic given seed, split sanity") {
  const env::Environment e = env::Environment::point_mass();
  const GaussianPolicy p = zero_policy();

  const EvalReport r1 = evaluate_policy(e, p, 20, 30, Rng(8));
  const EvalReport r2 = evaluate_policy(e, p, 20, 30, Rng(8));
  CHECK(r1.train.returns == r2.train.returns);
  CHECK(r1.test.returns == r2.test.returns);
  for (scalar_t ret : r1.train.returns) {
    CHECK(ret >= 0.0);
    CHECK(ret <= 1.0);
  }

  // The same split evaluated under two seeds agrees within sampling error.
  const SplitReport a =
      evaluate_split(e, p, env::GoalSplit::test, 200, 30, Rng(100));
  const SplitReport b =
      evaluate_split(e, p, env::GoalSplit::test, 200, 30, Rng(200));
  CHECK(std::abs(a.mean - b.mean) <= 2.0 * (a.stderr_mean + b.stderr_mean) + 1e-9);
}

TEST_CASE("policy persistence round-trips") {
  GaussianPolicy p;
  p.sdim = 4;
  p.gdim = 2;
  p.adim = 2;
  p.log_std = std::log(0.25);
  p.net = diff::mlp_init(6, {5}, 2, 41);
  const auto path = std::filesystem::temp_directory_path() / "equiaug_policy_test.json";
  save_policy(p, path);
  const GaussianPolicy back = load_policy(path);
  CHECK(back.log_std == p.log_std);
  CHECK(back.sdim == 4);
  for (std::size_t k = 0; k < p.net.layers.size(); ++k)
    CHECK(back.net.layers[k].w == p.net.layers[k].w);
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".meta");
}
