#pragma once

#include <vector>

#include "equiaug/types.hpp"

namespace equiaug::diff {

struct OptimizerConfig {
  scalar_t learning_rate = 1e-3;
  scalar_t beta1 = 0.9;
  scalar_t beta2 = 0.999;
  scalar_t epsilon = 1e-8;
  bool plain_sgd = false;  // p -= lr * g, no moments
};

/// Adam-style optimizer with a plain gradient-descent mode. Moment buffers
/// are allocated on the first step and must keep their shapes afterwards.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads);

  long steps_taken() const { return step_count_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  long step_count_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace equiaug::diff
