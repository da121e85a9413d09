#include "equiaug/optimizer.hpp"

#include <cmath>

namespace equiaug::diff {

void Optimizer::step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads) {
  require(params.size() == grads.size(), "optimizer: params/grads count mismatch");
  if (m_.empty()) {
    for (const Matrix* p : params) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  require(params.size() == m_.size(), "optimizer: parameter count changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i]->rows() == grads[i].rows() && params[i]->cols() == grads[i].cols(),
            "optimizer: gradient shape mismatch");
  }

  ++step_count_;
  if (cfg_.plain_sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      *params[i] -= cfg_.learning_rate * grads[i];
    }
  } else {
    const scalar_t bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<scalar_t>(step_count_));
    const scalar_t bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<scalar_t>(step_count_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i].array().square().matrix();
      const Matrix m_hat = m_[i] / bc1;
      const Matrix v_hat = v_[i] / bc2;
      params[i]->array() -=
          cfg_.learning_rate * m_hat.array() / (v_hat.array().sqrt() + cfg_.epsilon);
    }
  }

  for (const Matrix* p : params) {
    if (!p->allFinite()) throw NumericalError("optimizer: non-finite parameter after step");
  }
}

}  // namespace equiaug::diff
