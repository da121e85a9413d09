#pragma once

#include <functional>
#include <vector>

#include "equiaug/types.hpp"

namespace equiaug::diff {

using LossFn = std::function<scalar_t(const std::vector<Matrix>&)>;

/// Central finite-difference gradient estimate, one entry at a time.
/// Throws NumericalError if the loss evaluates non-finite at a probe point.
std::vector<Matrix> finite_diff_grad(const LossFn& loss, std::vector<Matrix> params,
                                     scalar_t step);

/// Largest relative elementwise error between two gradient sets, skipping
/// entries where both magnitudes fall below `skip_below`.
scalar_t max_relative_error(const std::vector<Matrix>& a, const std::vector<Matrix>& b,
                            scalar_t skip_below = 1e-8);

}  // namespace equiaug::diff
