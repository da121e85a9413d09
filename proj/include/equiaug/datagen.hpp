#pragma once

#include <optional>

#include "equiaug/dataset.hpp"
#include "equiaug/env.hpp"
#include "equiaug/rng.hpp"

namespace equiaug::data {

/// Scripted data-collection controller: a = clip(Kp (g - pos) - Kd vel).
/// Default gains are the frozen one-time tuning for the point mass; the
/// reacher configs ship kp=8, kd=2 with a 200-step horizon. Exploration
/// noise decorrelates executed actions from the state so the dynamics model
/// cannot shortcut through the controller law.
struct ScriptedControllerParams {
  scalar_t kp = 4.0;
  scalar_t kd = 2.0;
  int max_steps = 100;
  scalar_t action_low = -1.0;
  scalar_t action_high = 1.0;
  scalar_t action_noise = 0.2;  // uniform dither added before clipping
};

Vector pd_controller_action(const Vector& s, const Vector& g,
                            const ScriptedControllerParams& params);

/// Rolls out n_traj scripted episodes. Episodes end on goal reach or at the
/// horizon; every transition stores its trajectory's goal. When a noise
/// region is given, region noise perturbs each next state before it is
/// recorded and fed back (so the chaining invariant holds on noisy data).
Dataset collect_dataset(const env::Environment& e, const ScriptedControllerParams& ctrl,
                        int n_traj, env::GoalSplit split, Rng rng,
                        const std::optional<env::NoiseRegion>& noise = std::nullopt);

/// Hindsight relabeling: every transition's goal becomes the final achieved
/// state coordinates of its own trajectory; rewards are recomputed.
Dataset relabel_hindsight(const Dataset& d, const env::Environment& e);

enum class TranslateMode { subtract_start, random_shift };

struct ShiftRange {
  Vector low;   // one entry per masked dimension
  Vector high;
};

/// Known-symmetry trajectory translations on the environment's masked
/// dimensions (and goals). subtract_start moves each trajectory's first
/// position to the origin; random_shift adds one uniform offset per
/// trajectory. Stored rewards are kept and then verified against
/// recomputation; a mismatch throws.
Dataset translate_trajectories(const Dataset& d, const env::Environment& e,
                               TranslateMode mode,
                               const std::optional<ShiftRange>& shift_range, Rng rng);

/// Number of transitions whose stored reward disagrees with goal_reward
/// recomputed from (s2, g).
std::size_t count_reward_mismatches(const Dataset& d, const env::Environment& e);

struct GoalHistogram {
  int bins = 0;
  scalar_t lo = 0.0;
  scalar_t hi = 0.0;
  std::vector<std::vector<long>> counts;  // [ix][iy]
  long total = 0;
  scalar_t entropy = 0.0;  // nats, of the normalized histogram
  long occupied_cells = 0;
};

/// 2-D histogram of trajectory-final achieved positions (first two
/// coordinates of the last next-state per trajectory) over [lo,hi]^2.
GoalHistogram goal_histogram(const Dataset& d, int bins, scalar_t lo, scalar_t hi);

}  // namespace equiaug::data
