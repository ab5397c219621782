#pragma once

#include <functional>
#include <vector>

#include "sqa/tensor.hpp"

namespace sqa {

/// Central finite-difference check of the analytic gradient of f at x.
/// f must be pure and deterministic (verified by re-evaluation; a mismatch
/// raises ContractError) and must return a scalar.
/// Returns max over coordinates of |analytic - numeric| / max(1, |analytic|).
double finite_difference_check(const std::function<Tensor(const Tensor&)>& f,
                               Tensor x, double eps);

/// Multi-parameter variant: `loss` rebuilds the loss from the current values
/// of `params` on every call. Returns the max relative error over all
/// coordinates of all parameters.
double finite_difference_check_params(const std::function<Tensor()>& loss,
                                      std::vector<Tensor>& params, double eps);

}  // namespace sqa
