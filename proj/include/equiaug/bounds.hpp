#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "equiaug/dataset.hpp"
#include "equiaug/dynamics.hpp"
#include "equiaug/rng.hpp"
#include "equiaug/tape.hpp"

namespace equiaug::bounds {

/// Per-state-dimension box of the uniform offset distribution.
struct TranslationBounds {
  Vector low;
  Vector high;

  index_t dims() const { return low.size(); }
  Vector widths() const { return high - low; }
  bool valid(scalar_t tol = 0.0) const {
    return ((high - low).array() >= -tol).all();
  }
};

TranslationBounds symmetric_bounds(index_t dims, scalar_t width);

/// Collapses sub-tolerance inversions (low slightly above high) to zero-width
/// bounds at the midpoint; larger violations throw.
TranslationBounds clamp_valid(const TranslationBounds& b, scalar_t tol = 1e-6);

enum class LossVariant { v1, v2 };

struct BoundsLearnConfig {
  scalar_t lambda_e = 0.1;     // v1: entropy weight; v2: accuracy margin (default 0.01)
  scalar_t lambda_v = 10.0;
  scalar_t learning_rate = 1e-2;
  int iterations = 2000;
  int batch_size = 256;
  int offsets_per_sample = 4;
  LossVariant variant = LossVariant::v1;
  scalar_t entropy_floor = 1e-6;
  scalar_t init_width = 0.1;
  // Plain gradient descent instead of Adam. The product form of the v2 loss
  // couples all dimensions through the entropy factor; unnormalized steps
  // keep the validity penalty dominant there.
  bool plain_sgd = false;
  std::uint64_t seed = 0;
};

/// v2's margin default differs from v1's weight default.
BoundsLearnConfig default_config(LossVariant variant);

struct AugmentConfig {
  int passes = 10;  // M translation passes over the dataset
  std::uint64_t seed = 0;
};

struct BoundsTraceRow {
  int iter = 0;
  scalar_t loss_eq = 0.0;
  scalar_t r_ent = 0.0;
  scalar_t r_val = 0.0;
  scalar_t loss_dyn = 0.0;
  Vector low;
  Vector high;
};

struct BoundsTrace {
  std::vector<BoundsTraceRow> rows;
};

// --- numeric path (also the oracle surface for the acceptance suite) ---

/// Elementwise x + u. Goals take the goal-dimension slice of u before calling.
Vector apply_translation(const Vector& x, const Vector& u);

/// Reparameterized draws u = low + eps (high - low), eps uniform in [0,1).
Matrix sample_offsets(const TranslationBounds& b, int n, Rng& rng);

/// Differential entropy of the product-uniform with a width floor:
/// sum_d log(max(high_d - low_d, floor)). May be negative.
scalar_t entropy_reg(const TranslationBounds& b, scalar_t floor);

/// sum_d max(low_d - high_d, 0).
scalar_t validity_reg(const TranslationBounds& b);

/// One-step predictor used by the numeric equivariance loss; any callable
/// (s, a) -> s' works, including exact simulator steps.
using Predictor = std::function<Vector(const Vector&, const Vector&)>;

/// Mean over (sample, offset) rows of |f(s + u, a) - (s' + u)|^2 summed per
/// dimension. Rows of `offsets` pair with rows of the batch.
scalar_t equivariance_loss(const Predictor& f, const Matrix& states, const Matrix& actions,
                           const Matrix& next_states, const Matrix& offsets);
scalar_t equivariance_loss(const dyn::DynamicsModel& m, const Matrix& states,
                           const Matrix& actions, const Matrix& next_states,
                           const Matrix& offsets);

// --- taped path (gradients w.r.t. the bounds) ---

struct BoundsOnTape {
  diff::NodeId low = -1;   // 1 x d
  diff::NodeId high = -1;  // 1 x d
};

BoundsOnTape bounds_on_tape(diff::Tape& t, const TranslationBounds& b);

/// Builds the predicted next-state node from a translated-state node and the
/// batch's constant actions. The stock implementation wraps the dynamics
/// model; tests substitute analytic predictors composed from primitives.
using TapedPredictor =
    std::function<diff::NodeId(diff::Tape&, diff::NodeId, const Matrix&)>;

TapedPredictor taped_model_predictor(const dyn::DynamicsModel& m);

diff::NodeId sample_offsets(diff::Tape& t, const BoundsOnTape& phi, const Matrix& eps);
diff::NodeId entropy_reg(diff::Tape& t, const BoundsOnTape& phi, scalar_t floor);
diff::NodeId validity_reg(diff::Tape& t, const BoundsOnTape& phi);
diff::NodeId equivariance_loss(diff::Tape& t, const TapedPredictor& f, const Matrix& states,
                               const Matrix& actions, const Matrix& next_states,
                               diff::NodeId offsets);

struct JointLossParts {
  diff::NodeId loss = -1;
  scalar_t loss_eq = 0.0;
  scalar_t r_ent = 0.0;
  scalar_t r_val = 0.0;
  scalar_t loss_dyn = 0.0;
};

/// v1: loss_eq - lambda_e * r_ent + lambda_v * r_val.
/// v2: r_ent * (loss_eq - loss_dyn - lambda_e) + lambda_v * r_val, with
/// loss_dyn the same batch at u = 0 and gradient flowing through both
/// factors. `eps` rows pair with batch rows (caller tiles for multiple
/// offsets per sample).
JointLossParts joint_loss(diff::Tape& t, const BoundsOnTape& phi, const TapedPredictor& f,
                          const Matrix& states, const Matrix& actions,
                          const Matrix& next_states, const BoundsLearnConfig& cfg,
                          const Matrix& eps);

// --- learning ---

/// K gradient steps on the bounds with minibatches and fresh offsets; the
/// model weights are never touched. Deterministic given cfg.seed.
std::pair<TranslationBounds, BoundsTrace> learn_bounds(const dyn::DynamicsModel& m,
                                                       const data::Dataset& d,
                                                       const BoundsLearnConfig& cfg);

/// Generic-predictor variant (batch arrays supplied directly).
std::pair<TranslationBounds, BoundsTrace> learn_bounds(const TapedPredictor& f,
                                                       const Matrix& states,
                                                       const Matrix& actions,
                                                       const Matrix& next_states,
                                                       const BoundsLearnConfig& cfg);

/// learn_bounds with the equivariance term removed: only entropy maximization
/// and the validity penalty remain, so widths grow until the iteration cap.
BoundsTrace entropy_only_ablation(int state_dim, const BoundsLearnConfig& cfg);

/// M independent passes; each pass draws one offset per transition and
/// translates s, s2 and the goal slice by it. Augmented transitions become
/// singleton synthetic trajectories (fresh traj id, t = 0). |D'| = M |D|.
data::Dataset augment_dataset(const data::Dataset& d, const TranslationBounds& b,
                              const AugmentConfig& cfg);

data::Dataset concat_datasets(const data::Dataset& a, const data::Dataset& b);

// --- persistence ---

void save_bounds(const TranslationBounds& b, const std::filesystem::path& path);
TranslationBounds load_bounds(const std::filesystem::path& path);

/// CSV with header iter,loss_eq,r_ent,r_val,loss_dyn,low_0..low_{d-1},
/// high_0..high_{d-1}.
void save_trace_csv(const BoundsTrace& trace, const std::filesystem::path& path);

}  // namespace equiaug::bounds
