#include "equiaug/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace equiaug::diff {

std::vector<Matrix> finite_diff_grad(const LossFn& loss, std::vector<Matrix> params,
                                     scalar_t step) {
  require(step > 0.0, "finite_diff_grad: step must be positive");
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix g = Matrix::Zero(params[k].rows(), params[k].cols());
    for (index_t i = 0; i < g.rows(); ++i) {
      for (index_t j = 0; j < g.cols(); ++j) {
        const scalar_t saved = params[k](i, j);
        params[k](i, j) = saved + step;
        const scalar_t up = loss(params);
        params[k](i, j) = saved - step;
        const scalar_t down = loss(params);
        params[k](i, j) = saved;
        if (!std::isfinite(up) || !std::isfinite(down))
          throw NumericalError("finite_diff_grad: non-finite loss evaluation");
        g(i, j) = (up - down) / (2.0 * step);
      }
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

scalar_t max_relative_error(const std::vector<Matrix>& a, const std::vector<Matrix>& b,
                            scalar_t skip_below) {
  require(a.size() == b.size(), "max_relative_error: set sizes differ");
  scalar_t worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    require(a[k].rows() == b[k].rows() && a[k].cols() == b[k].cols(),
            "max_relative_error: shape mismatch");
    for (index_t i = 0; i < a[k].rows(); ++i) {
      for (index_t j = 0; j < a[k].cols(); ++j) {
        const scalar_t x = a[k](i, j);
        const scalar_t y = b[k](i, j);
        if (std::abs(x) < skip_below && std::abs(y) < skip_below) continue;
        const scalar_t rel = std::abs(x - y) / std::max(std::abs(x), std::abs(y));
        worst = std::max(worst, rel);
      }
    }
  }
  return worst;
}

}  // namespace equiaug::diff
