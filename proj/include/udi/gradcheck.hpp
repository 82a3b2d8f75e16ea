#pragma once

#include <functional>

#include "udi/paramset.hpp"

namespace udi {

/// Central-finite-difference check of the analytic gradients of a scalar
/// function over a ParamSet. Returns the max over all parameter scalars of
///   |analytic - (f(t+h) - f(t-h)) / 2h| / max(1, |analytic|).
/// The function must be deterministic; two forward evaluations that disagree
/// raise a ContractError.
double grad_check(const std::function<Tensor()>& f, ParamSet& params, double h = 1e-5);

}  // namespace udi
