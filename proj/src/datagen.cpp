#include "equiaug/datagen.hpp"

#include <algorithm>
#include <cmath>

namespace equiaug::data {

Vector pd_controller_action(const Vector& s, const Vector& g,
                            const ScriptedControllerParams& params) {
  require(params.kp >= 0.0 && params.kd >= 0.0, "pd_controller: gains must be >= 0");
  require(g.size() * 2 == s.size(), "pd_controller: state is not (pos, vel) over goal dims");
  Vector a = params.kp * (g - s.head(g.size())) - params.kd * s.tail(g.size());
  return a.cwiseMax(params.action_low).cwiseMin(params.action_high);
}

Dataset collect_dataset(const env::Environment& e, const ScriptedControllerParams& ctrl,
                        int n_traj, env::GoalSplit split, Rng rng,
                        const std::optional<env::NoiseRegion>& noise) {
  require(n_traj >= 1, "collect_dataset: n_traj must be >= 1");
  require(ctrl.max_steps >= 1, "collect_dataset: horizon must be >= 1");

  Dataset d;
  d.env_tag = e.tag();
  d.sdim = e.state_dim();
  d.adim = e.action_dim();
  d.gdim = e.goal_dim();

  const std::vector<Vector> goals = e.sample_goals(split, n_traj, rng);
  for (int k = 0; k < n_traj; ++k) {
    Rng episode_rng = rng.derive(static_cast<std::uint64_t>(k));
    Vector s = e.sample_initial_state(episode_rng);
    const Vector& goal = goals[k];
    for (int t = 0; t < ctrl.max_steps; ++t) {
      Vector a = pd_controller_action(s, goal, ctrl);
      if (ctrl.action_noise > 0.0) {
        for (index_t j = 0; j < a.size(); ++j)
          a[j] += episode_rng.uniform(-ctrl.action_noise, ctrl.action_noise);
        a = a.cwiseMax(ctrl.action_low).cwiseMin(ctrl.action_high);
      }
      Vector s2 = e.step(s, a);
      if (noise) s2 = env::apply_region_noise(s2, *noise, episode_rng);
      const scalar_t r = e.reward(s2, goal);
      const bool done = r > 0.0 || t + 1 == ctrl.max_steps;
      d.transitions.push_back({s, a, r, s2, goal, done, k, t, Origin::original});
      if (r > 0.0) break;
      s = s2;
    }
  }
  return d;
}

Dataset relabel_hindsight(const Dataset& d, const env::Environment& e) {
  Dataset out = d;
  for (const auto& traj : out.trajectories()) {
    const Vector achieved = out.transitions[traj.back()].s2.head(out.gdim);
    for (std::size_t i : traj) {
      Transition& tr = out.transitions[i];
      tr.g = achieved;
      tr.r = e.reward(tr.s2, tr.g);
      tr.done = tr.r > 0.0 || tr.done;
      tr.origin = Origin::relabeled;
    }
  }
  return out;
}

namespace {

void shift_transition(Transition& tr, const std::vector<int>& mask, const Vector& offset) {
  for (std::size_t k = 0; k < mask.size(); ++k) {
    tr.s[mask[k]] += offset[k];
    tr.s2[mask[k]] += offset[k];
  }
  // Goals hold the goal-relevant state coordinates, which are exactly the
  // masked dimensions for both environments.
  for (std::size_t k = 0; k < mask.size(); ++k)
    if (mask[k] < tr.g.size()) tr.g[mask[k]] += offset[k];
}

}  // namespace

Dataset translate_trajectories(const Dataset& d, const env::Environment& e,
                               TranslateMode mode,
                               const std::optional<ShiftRange>& shift_range, Rng rng) {
  const std::vector<int> mask = e.translation_mask();
  if (mode == TranslateMode::random_shift)
    require(shift_range.has_value(), "translate_trajectories: random_shift needs a range");
  if (shift_range) {
    require(shift_range->low.size() == static_cast<index_t>(mask.size()) &&
                shift_range->high.size() == static_cast<index_t>(mask.size()),
            "translate_trajectories: shift range width must match mask");
  }

  Dataset out = d;
  for (const auto& traj : out.trajectories()) {
    Vector offset(static_cast<index_t>(mask.size()));
    if (mode == TranslateMode::subtract_start) {
      for (std::size_t k = 0; k < mask.size(); ++k)
        offset[k] = -out.transitions[traj.front()].s[mask[k]];
    } else {
      for (std::size_t k = 0; k < mask.size(); ++k)
        offset[k] = rng.uniform(shift_range->low[k], shift_range->high[k]);
    }
    for (std::size_t i : traj) shift_transition(out.transitions[i], mask, offset);
  }

  // Translation must preserve the state-goal distances behind every stored
  // reward; verify rather than recompute in the hot path.
  if (count_reward_mismatches(out, e) != 0)
    throw NumericalError("translate_trajectories: stored rewards no longer reproducible");
  return out;
}

std::size_t count_reward_mismatches(const Dataset& d, const env::Environment& e) {
  std::size_t mismatches = 0;
  for (const Transition& tr : d.transitions)
    if (e.reward(tr.s2, tr.g) != tr.r) ++mismatches;
  return mismatches;
}

GoalHistogram goal_histogram(const Dataset& d, int bins, scalar_t lo, scalar_t hi) {
  require(bins >= 1, "goal_histogram: bins must be >= 1");
  require(hi > lo, "goal_histogram: empty range");

  GoalHistogram h;
  h.bins = bins;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(bins, std::vector<long>(bins, 0));

  const scalar_t width = (hi - lo) / static_cast<scalar_t>(bins);
  auto bin_of = [&](scalar_t x) {
    const int b = static_cast<int>(std::floor((x - lo) / width));
    return std::clamp(b, 0, bins - 1);
  };

  for (const auto& traj : d.trajectories()) {
    const Vector& fin = d.transitions[traj.back()].s2;
    ++h.counts[bin_of(fin[0])][bin_of(fin[1])];
    ++h.total;
  }

  for (const auto& row : h.counts) {
    for (long c : row) {
      if (c == 0) continue;
      ++h.occupied_cells;
      const scalar_t p = static_cast<scalar_t>(c) / static_cast<scalar_t>(h.total);
      h.entropy -= p * std::log(p);
    }
  }
  return h;
}

}  // namespace equiaug::data
