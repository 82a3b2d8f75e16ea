#pragma once

#include <span>
#include <string>

#include "udi/nets.hpp"

namespace udi {

/// Per-epoch record of the follower objective's pieces. total is assembled
/// by the pipeline as cls + alpha_con * con + alpha_com * com.
struct LossBreakdown {
  double cls = 0.0;
  double con = 0.0;
  double com = 0.0;
  double mi_nll = 0.0;
  double total = 0.0;
  std::string pair;  // "<anchor>-><follower>" provenance
};

/// Mean over the batch of -log probability of the true class (natural log).
/// Rows of probs must sum to 1 within 1e-6; labels must be one-hot.
Tensor cross_entropy(const Tensor& probs, const Tensor& onehot_labels);

/// KL(p || q) for two probability rows, q clamped at 1e-12, 0 log 0 = 0.
double kl_div(std::span<const double> p, std::span<const double> q);

/// Jensen-Shannon consistency between anchor and follower predictions.
/// Differentiable w.r.t. y_m only (y_a is detached: the anchor is frozen).
/// Normalized by batch size by default; `normalize=false` gives the plain
/// sum over samples.
Tensor js_consistency(const Tensor& y_a, const Tensor& y_m, bool normalize = true);

/// Negative log-likelihood that trains the variational conditional.
/// Gradients flow to the estimator parameters only; both feature inputs are
/// detached.
Tensor mi_nll(const GaussianConditional& q, const ParamSet& q_params, const Tensor& f_a,
              const Tensor& f_m);

/// Variational upper-bound estimate of I(f_a; f_m), used as the complementary
/// loss: mean diagonal log density minus mean over the full n x n grid.
/// Gradients flow through f_m only; the estimator parameters and f_a are
/// detached so the follower cannot lower the bound by corrupting either.
Tensor mi_upper_bound(const GaussianConditional& q, const ParamSet& q_params, const Tensor& f_a,
                      const Tensor& f_m);

/// Mean Shannon entropy of the predicted distributions (natural log).
double predictive_entropy(const Tensor& probs);

}  // namespace udi
