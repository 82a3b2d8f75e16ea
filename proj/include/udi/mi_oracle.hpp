#pragma once

#include <span>
#include <vector>

#include "udi/errors.hpp"

namespace udi {

/// Joint probability table over finite alphabets; entries nonnegative and
/// summing to 1 within 1e-12.
struct DiscreteJoint {
  int nx = 0;
  int ny = 0;
  std::vector<double> p;  // row-major nx x ny

  double at(int x, int y) const { return p[static_cast<std::size_t>(x) * ny + y]; }
  void validate() const;
  std::vector<double> marginal_x() const;
  std::vector<double> marginal_y() const;
};

/// I(X;Y) = sum p(x,y) log [p(x,y) / (p(x) p(y))], natural log, zero cells skipped.
double discrete_mi(const DiscreteJoint& joint);

/// Shannon entropy of a distribution, natural log.
double discrete_entropy(std::span<const double> dist);

/// Closed-form evaluation, over a finite joint, of the two expectations of
/// the upper-bound estimator with the TRUE conditional p(y|x) plugged in:
///   E_{p(x,y)}[log p(y|x)] - E_{p(x)} E_{p(y)}[log p(y|x)].
/// Used to machine-check that the bound dominates discrete_mi.
double discrete_mi_upper_bound(const DiscreteJoint& joint);

/// -1/2 log(1 - rho^2): MI of a bivariate Gaussian with correlation rho.
double gaussian_mi(double rho);

/// Quantile-bin both streams and take discrete_mi of the resulting table.
/// Positive bias of roughly (bins-1)^2 / (2N) at small N; rank binning keeps
/// the estimate invariant under strictly monotone transforms.
double binned_empirical_mi(std::span<const double> x, std::span<const double> y, int bins);

}  // namespace udi
