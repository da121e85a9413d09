#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "equiaug/dataset.hpp"
#include "equiaug/mlp.hpp"

namespace equiaug::dyn {

struct DynamicsModelConfig {
  std::vector<int> hidden_dims{64, 64};
  scalar_t learning_rate = 1e-3;
  int batch_size = 256;
  int epochs = 200;
  scalar_t validation_fraction = 0.1;
  bool predict_delta = true;
  std::uint64_t seed = 0;
};

/// One-step predictor (s, a) -> s'. In delta mode the network outputs
/// s' - s and the wrapper adds s back.
struct DynamicsModel {
  diff::MlpNetwork net;
  bool predict_delta = true;
  int sdim = 0;
  int adim = 0;
};

struct TrainReport {
  std::vector<scalar_t> epoch_loss;
  scalar_t validation_loss = 0.0;
  scalar_t wall_seconds = 0.0;
};

/// Minimizes the mean squared one-step error over minibatches. Deterministic
/// given cfg.seed; throws NumericalError (with the epoch index) if the loss
/// goes non-finite.
std::pair<DynamicsModel, TrainReport> train_dynamics_model(const data::Dataset& d,
                                                           const DynamicsModelConfig& cfg);

Vector predict_next(const DynamicsModel& m, const Vector& s, const Vector& a);
Matrix predict_next(const DynamicsModel& m, const Matrix& states, const Matrix& actions);

/// Mean over all transitions of the summed squared per-dimension error.
scalar_t eval_model(const DynamicsModel& m, const data::Dataset& d);

void save_model(const DynamicsModel& m, const std::filesystem::path& weights,
                const std::filesystem::path& sidecar);
DynamicsModel load_model(const std::filesystem::path& weights,
                         const std::filesystem::path& sidecar);

}  // namespace equiaug::dyn
