#include "udi/mi_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "udi/errors.hpp"

namespace udi {

void DiscreteJoint::validate() const {
  if (nx <= 0 || ny <= 0 || p.size() != static_cast<std::size_t>(nx) * ny)
    throw ShapeError("DiscreteJoint: table size does not match alphabet sizes");
  double s = 0.0;
  for (double v : p) {
    if (v < 0.0) throw NumericError("DiscreteJoint: negative cell");
    s += v;
  }
  if (std::fabs(s - 1.0) > 1e-12)
    throw NumericError("DiscreteJoint: table sums to " + std::to_string(s));
}

std::vector<double> DiscreteJoint::marginal_x() const {
  std::vector<double> m(nx, 0.0);
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) m[x] += at(x, y);
  return m;
}

std::vector<double> DiscreteJoint::marginal_y() const {
  std::vector<double> m(ny, 0.0);
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) m[y] += at(x, y);
  return m;
}

double discrete_mi(const DiscreteJoint& joint) {
  joint.validate();
  const auto px = joint.marginal_x();
  const auto py = joint.marginal_y();
  double mi = 0.0;
  for (int x = 0; x < joint.nx; ++x)
    for (int y = 0; y < joint.ny; ++y) {
      const double pxy = joint.at(x, y);
      if (pxy <= 0.0) continue;
      mi += pxy * std::log(pxy / (px[x] * py[y]));
    }
  return mi;
}

double discrete_entropy(std::span<const double> dist) {
  double h = 0.0;
  for (double v : dist)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double discrete_mi_upper_bound(const DiscreteJoint& joint) {
  joint.validate();
  const auto px = joint.marginal_x();
  const auto py = joint.marginal_y();
  double joint_term = 0.0;    // E_{p(x,y)} log p(y|x)
  double product_term = 0.0;  // E_{p(x)} E_{p(y)} log p(y|x)
  for (int x = 0; x < joint.nx; ++x) {
    if (px[x] <= 0.0) continue;
    for (int y = 0; y < joint.ny; ++y) {
      const double cond = joint.at(x, y) / px[x];
      if (joint.at(x, y) > 0.0) joint_term += joint.at(x, y) * std::log(cond);
      if (py[y] > 0.0) {
        // log 0 makes the bound +infinity, which still dominates.
        product_term += px[x] * py[y] * (cond > 0.0 ? std::log(cond)
                                                    : -std::numeric_limits<double>::infinity());
      }
    }
  }
  return joint_term - product_term;
}

double gaussian_mi(double rho) {
  if (std::fabs(rho) >= 1.0)
    throw NumericError("gaussian_mi: |rho| must be < 1, got " + std::to_string(rho));
  return -0.5 * std::log(1.0 - rho * rho);
}

namespace {

// Equal-count bin ids via rank; ties broken by index, deterministic.
std::vector<int> quantile_bins(std::span<const double> v, int bins) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<int> bin(n);
  for (std::size_t rank = 0; rank < n; ++rank)
    bin[order[rank]] = static_cast<int>((rank * static_cast<std::size_t>(bins)) / n);
  return bin;
}

}  // namespace

double binned_empirical_mi(std::span<const double> x, std::span<const double> y, int bins) {
  if (x.size() != y.size()) throw ShapeError("binned_empirical_mi: length mismatch");
  if (x.empty()) throw ContractError("binned_empirical_mi: empty input");
  if (bins < 2) throw ContractError("binned_empirical_mi: bins must be >= 2");

  const auto bx = quantile_bins(x, bins);
  const auto by = quantile_bins(y, bins);
  DiscreteJoint joint;
  joint.nx = bins;
  joint.ny = bins;
  joint.p.assign(static_cast<std::size_t>(bins) * bins, 0.0);
  const double w = 1.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    joint.p[static_cast<std::size_t>(bx[i]) * bins + by[i]] += w;
  // Counting error can leave the sum a few ulps off 1; renormalize.
  double s = 0.0;
  for (double v : joint.p) s += v;
  for (double& v : joint.p) v /= s;
  return discrete_mi(joint);
}

}  // namespace udi
