#include "udi/losses.hpp"

#include <cmath>

namespace udi {

namespace {

void check_prob_rows(const Tensor& probs, const char* op) {
  const int n = probs.rows(), c = probs.cols();
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += probs.at(i, j);
    if (std::fabs(s - 1.0) > 1e-6)
      throw ContractError(std::string(op) + ": probability row " + std::to_string(i) +
                          " sums to " + std::to_string(s));
  }
}

}  // namespace

Tensor cross_entropy(const Tensor& probs, const Tensor& onehot_labels) {
  if (probs.shape() != onehot_labels.shape())
    throw ShapeError("cross_entropy: probs " + shape_str(probs.shape()) + " vs labels " +
                     shape_str(onehot_labels.shape()));
  check_prob_rows(probs, "cross_entropy");
  const double inv_n = 1.0 / probs.rows();
  Tensor picked = mul(onehot_labels.detach(), log_t(probs));
  return scale(sum_all(picked), -inv_n);
}

double kl_div(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("kl_div: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;  // 0 log(0/q) = 0
    s += p[i] * std::log(p[i] / std::max(q[i], kLogFloor));
  }
  return s;
}

Tensor js_consistency(const Tensor& y_a, const Tensor& y_m, bool normalize) {
  if (y_a.shape() != y_m.shape())
    throw ShapeError("js_consistency: " + shape_str(y_a.shape()) + " vs " +
                     shape_str(y_m.shape()));
  Tensor anchor = y_a.detach();
  Tensor mix = scale(add(anchor, y_m), 0.5);
  Tensor log_mix = log_t(mix);
  // sum_i p log(p/H) for both sides; anchor side still depends on y_m via H.
  Tensor kl_a = sum_all(mul(anchor, sub(log_t(anchor), log_mix)));
  Tensor kl_m = sum_all(mul(y_m, sub(log_t(y_m), log_mix)));
  const double norm = normalize ? 1.0 / y_a.rows() : 1.0;
  return scale(add(kl_a, kl_m), 0.5 * norm);
}

Tensor mi_nll(const GaussianConditional& q, const ParamSet& q_params, const Tensor& f_a,
              const Tensor& f_m) {
  Tensor ld = q.log_q(q_params, f_a.detach(), f_m.detach(), /*detach_params=*/false);
  return scale(sum_all(ld), -1.0 / f_a.rows());
}

Tensor mi_upper_bound(const GaussianConditional& q, const ParamSet& q_params, const Tensor& f_a,
                      const Tensor& f_m) {
  const int n = f_a.rows();
  Tensor grid = q.log_q_cross(q_params, f_a.detach(), f_m, /*detach_params=*/true);
  Tensor diag_mean = scale(diag_sum(grid), 1.0 / n);
  Tensor full_mean = scale(sum_all(grid), 1.0 / (static_cast<double>(n) * n));
  return sub(diag_mean, full_mean);
}

double predictive_entropy(const Tensor& probs) {
  const int n = probs.rows(), c = probs.cols();
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double h = 0.0;
    for (int j = 0; j < c; ++j) {
      const double p = probs.at(i, j);
      if (p > 0.0) h -= p * std::log(p);
    }
    total += h;
  }
  return total / n;
}

}  // namespace udi
