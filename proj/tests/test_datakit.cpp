#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "equiaug/datagen.hpp"

using namespace equiaug;
using namespace equiaug::data;

namespace {

Dataset point_mass_train(int n_traj, std::uint64_t seed,
                         const std::optional<env::NoiseRegion>& noise = std::nullopt) {
  const env::Environment e = env::Environment::point_mass();
  ScriptedControllerParams ctrl;
  return collect_dataset(e, ctrl, n_traj, env::GoalSplit::train, Rng(seed), noise);
}

}  // namespace

TEST_CASE("pd controller: zero error, proportional law, saturation") {
  ScriptedControllerParams p;
  p.kp = 1.0;
  p.kd = 0.0;
  Vector s = Vector::Zero(4);
  Vector g = Vector::Zero(2);
  CHECK(pd_controller_action(s, g, p).isZero(0.0));

  g << 0.5, 0.0;
  const Vector a = pd_controller_action(s, g, p);
  CHECK(a[0] == doctest::Approx(0.5));
  CHECK(a[1] == 0.0);

  g << 100.0, -100.0;
  const Vector sat = pd_controller_action(s, g, p);
  CHECK(sat[0] == 1.0);
  CHECK(sat[1] == -1.0);

  CHECK_THROWS_AS(pd_controller_action(Vector::Zero(3), g, p), std::invalid_argument);
}

TEST_CASE("collect_dataset: goals, chaining, reach rate, determinism") {
  const Dataset d = point_mass_train(100, 42);
  const auto trajs = d.trajectories();
  REQUIRE(trajs.size() == 100);

  for (const Transition& tr : d.transitions) {
    CHECK(tr.g[0] == 0.0);
    CHECK(tr.g[1] == 0.0);
    CHECK((tr.r == 0.0 || tr.r == 1.0));
  }

  int reached = 0;
  for (const auto& traj : trajs) {
    for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
      CHECK(d.transitions[traj[k]].s2 == d.transitions[traj[k + 1]].s);
      CHECK(d.transitions[traj[k]].t + 1 == d.transitions[traj[k + 1]].t);
    }
    CHECK(d.transitions[traj.back()].done);
    if (d.transitions[traj.back()].r > 0.0) ++reached;
  }
  CHECK(reached >= 90);

  const Dataset again = point_mass_train(100, 42);
  CHECK(datasets_equal(d, again));
  const Dataset other = point_mass_train(100, 43);
  CHECK(!datasets_equal(d, other));
}

TEST_CASE("collect_dataset: reacher reach rate with frozen gains") {
  const env::Environment e = env::Environment::reacher();
  ScriptedControllerParams ctrl;
  ctrl.kp = 8.0;
  ctrl.kd = 2.0;
  ctrl.max_steps = 200;
  const Dataset d = collect_dataset(e, ctrl, 50, env::GoalSplit::train, Rng(7));
  int reached = 0;
  for (const auto& traj : d.trajectories())
    if (d.transitions[traj.back()].r > 0.0) ++reached;
  CHECK(reached >= 45);
}

TEST_CASE("relabel_hindsight: rewards, terminal set, origin") {
  const env::Environment e = env::Environment::point_mass();
  const Dataset d = point_mass_train(40, 3);
  const Dataset rl = relabel_hindsight(d, e);
  REQUIRE(rl.size() == d.size());

  const auto before = d.trajectories();
  const auto after = rl.trajectories();
  REQUIRE(before.size() == after.size());
  for (std::size_t k = 0; k < before.size(); ++k) {
    // Terminal achieved states are untouched by relabeling.
    CHECK(rl.transitions[after[k].back()].s2 == d.transitions[before[k].back()].s2);
    // The relabeled goal is each trajectory's own final achieved position,
    // so the last transition always earns the reward.
    CHECK(rl.transitions[after[k].back()].r == 1.0);
    for (std::size_t i : after[k]) {
      CHECK(rl.transitions[i].origin == Origin::relabeled);
      CHECK(rl.transitions[i].g == d.transitions[before[k].back()].s2.head(2));
    }
  }
  CHECK(count_reward_mismatches(rl, e) == 0);
}

TEST_CASE("relabel_hindsight: trajectory ending exactly at its goal keeps rewards") {
  const env::Environment e = env::Environment::point_mass();
  Dataset d;
  d.env_tag = "point_mass";
  d.sdim = 4;
  d.adim = 2;
  d.gdim = 2;
  Vector g(2);
  g << 0.3, -0.4;
  Vector s = Vector::Zero(4);
  s << 1.0, 1.0, 0.0, 0.0;
  const Vector way = Vector::Zero(4);
  Vector fin = Vector::Zero(4);
  fin.head(2) = g;  // lands exactly on the goal
  const Vector act = Vector::Zero(2);
  d.transitions.push_back({s, act, 0.0, way, g, false, 0, 0, Origin::original});
  d.transitions.push_back({way, act, 1.0, fin, g, true, 0, 1, Origin::original});

  const Dataset rl = relabel_hindsight(d, e);
  CHECK(rl.transitions[0].r == d.transitions[0].r);
  CHECK(rl.transitions[1].r == d.transitions[1].r);
  CHECK(rl.transitions[0].g == g);
}

TEST_CASE("translate_trajectories: subtract_start is idempotent and zeroes starts") {
  const env::Environment e = env::Environment::point_mass();
  const Dataset d = point_mass_train(30, 11);
  Rng rng(1);
  const Dataset shifted =
      translate_trajectories(d, e, TranslateMode::subtract_start, std::nullopt, rng);

  for (const auto& traj : shifted.trajectories()) {
    CHECK(shifted.transitions[traj.front()].s[0] == 0.0);
    CHECK(shifted.transitions[traj.front()].s[1] == 0.0);
  }
  CHECK(count_reward_mismatches(shifted, e) == 0);

  const Dataset twice =
      translate_trajectories(shifted, e, TranslateMode::subtract_start, std::nullopt, rng);
  CHECK(datasets_equal(shifted, twice));
}

TEST_CASE("translate_trajectories: random_shift preserves rewards and chaining") {
  const env::Environment e = env::Environment::point_mass();
  const Dataset d = point_mass_train(30, 19);

  ShiftRange zero{Vector::Zero(2), Vector::Zero(2)};
  const Dataset unchanged =
      translate_trajectories(d, e, TranslateMode::random_shift, zero, Rng(5));
  CHECK(datasets_equal(d, unchanged));

  ShiftRange arena{Vector::Constant(2, -1.0), Vector::Constant(2, 1.0)};
  const Dataset shifted =
      translate_trajectories(d, e, TranslateMode::random_shift, arena, Rng(5));
  CHECK(count_reward_mismatches(shifted, e) == 0);
  for (const auto& traj : shifted.trajectories())
    for (std::size_t k = 0; k + 1 < traj.size(); ++k)
      CHECK(shifted.transitions[traj[k]].s2 == shifted.transitions[traj[k + 1]].s);

  CHECK_THROWS_AS(
      translate_trajectories(d, e, TranslateMode::random_shift, std::nullopt, Rng(5)),
      std::invalid_argument);
}

TEST_CASE("dataset persistence round-trips exactly") {
  const Dataset d = point_mass_train(10, 77);
  const auto path = std::filesystem::temp_directory_path() / "equiaug_dataset_test.jsonl";
  save_dataset(d, path);
  const Dataset back = load_dataset(path);
  CHECK(datasets_equal(d, back));

  // Truncating the file mid-line must fail cleanly, not load partially.
  std::ifstream in(path);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out(path);
  out << all.substr(0, all.size() / 2);
  out.close();
  CHECK_THROWS_AS(load_dataset(path), ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("empty dataset saves header-only and loads back") {
  Dataset d;
  d.env_tag = "point_mass";
  d.sdim = 4;
  d.adim = 2;
  d.gdim = 2;
  d.seed = 9;
  const auto path = std::filesystem::temp_directory_path() / "equiaug_empty_test.jsonl";
  save_dataset(d, path);
  const Dataset back = load_dataset(path);
  CHECK(back.empty());
  CHECK(back.env_tag == "point_mass");
  CHECK(back.seed == 9);
  std::filesystem::remove(path);
}

TEST_CASE("goal_histogram: train data concentrates in the centre bin") {
  const Dataset d = point_mass_train(100, 2);
  const GoalHistogram h = goal_histogram(d, 5, -1.0, 1.0);
  CHECK(h.total == 100);
  CHECK(h.counts[2][2] == 100);  // centre bin holds every goal-reaching final
  CHECK(h.occupied_cells == 1);
  CHECK(h.entropy == 0.0);

  const GoalHistogram single = goal_histogram(point_mass_train(1, 3), 5, -1.0, 1.0);
  CHECK(single.total == 1);

  CHECK_THROWS_AS(goal_histogram(d, 0, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("goal_histogram: random_shift spreads mass towards uniform") {
  const env::Environment e = env::Environment::point_mass();
  const Dataset d = point_mass_train(100, 31);
  ShiftRange arena{Vector::Constant(2, -1.0), Vector::Constant(2, 1.0)};
  const Dataset shifted =
      translate_trajectories(d, e, TranslateMode::random_shift, arena, Rng(6));
  const GoalHistogram h = goal_histogram(shifted, 5, -1.0, 1.0);

  // Uniform reference with the same sample count over the same grid.
  Rng rng(99);
  Dataset uniform_ref;
  uniform_ref.env_tag = "point_mass";
  uniform_ref.sdim = 4;
  uniform_ref.adim = 2;
  uniform_ref.gdim = 2;
  for (int i = 0; i < 100; ++i) {
    Transition tr;
    tr.s = Vector::Zero(4);
    tr.a = Vector::Zero(2);
    tr.s2 = Vector::Zero(4);
    tr.s2[0] = rng.uniform(-1.0, 1.0);
    tr.s2[1] = rng.uniform(-1.0, 1.0);
    tr.g = Vector::Zero(2);
    tr.traj_id = i;
    uniform_ref.transitions.push_back(std::move(tr));
  }
  const GoalHistogram ref = goal_histogram(uniform_ref, 5, -1.0, 1.0);
  CHECK(h.entropy >= 0.8 * std::log(static_cast<scalar_t>(ref.occupied_cells)));
}

TEST_CASE("region-noise collection keeps chaining and only perturbs x>0") {
  env::NoiseRegion region;  // x > 0, amplitude 0.1
  const Dataset clean = point_mass_train(30, 55);
  const Dataset noisy = point_mass_train(30, 55, region);

  bool any_noise = false;
  for (const auto& traj : noisy.trajectories())
    for (std::size_t k = 0; k + 1 < traj.size(); ++k)
      CHECK(noisy.transitions[traj[k]].s2 == noisy.transitions[traj[k + 1]].s);
  for (std::size_t i = 0; i < std::min(clean.size(), noisy.size()); ++i) {
    if (clean.transitions[i].s != noisy.transitions[i].s) {
      any_noise = true;
      break;
    }
  }
  CHECK(any_noise);
}
