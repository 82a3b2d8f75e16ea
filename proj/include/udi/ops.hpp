#pragma once

#include "udi/tensor.hpp"

namespace udi {

// Probabilities and divergences clamp log arguments here.
inline constexpr double kLogFloor = 1e-12;

Tensor add(const Tensor& a, const Tensor& b);
/// n x m plus a length-m (or 1 x m) bias broadcast over rows.
Tensor add_rowvec(const Tensor& x, const Tensor& bias);
/// n x m times a length-m vector broadcast over rows. Together with
/// add_rowvec this is the whole broadcast surface of the op set.
Tensor mul_rowvec(const Tensor& x, const Tensor& v);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp_t(const Tensor& a);
/// Natural log with the argument clamped below at kLogFloor.
Tensor log_t(const Tensor& a);
/// Gradient passes only strictly inside (lo, hi).
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor matmul(const Tensor& a, const Tensor& b);

/// Row-stable softmax; rows sum to 1 within 1e-12.
Tensor softmax_rows(const Tensor& z);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor diag_sum(const Tensor& a);  // square matrices

/// Per-row diagonal-Gaussian log density of y under N(mu, exp(lv)); rank-1 output.
Tensor gauss_logdensity(const Tensor& mu, const Tensor& lv, const Tensor& y);
/// n x n grid: entry (i,j) = log density of y row j under the conditional at row i.
Tensor gauss_cross_logdensity(const Tensor& mu, const Tensor& lv, const Tensor& y);

}  // namespace udi
