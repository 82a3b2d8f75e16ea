#pragma once

#include <string>
#include <vector>

#include "udi/ops.hpp"
#include "udi/paramset.hpp"

namespace udi {

/// Fetch a parameter for a forward pass, optionally as a graph-cut constant.
Tensor param_view(const ParamSet& ps, const std::string& key, bool detached);

/// Fully-connected stack with ReLU between layers and a linear final layer.
/// dims = [d_in, h1, ..., d_out]; parameters live under "<prefix>.l<i>.W/b".
class MlpEncoder {
 public:
  MlpEncoder() = default;
  MlpEncoder(std::string prefix, std::vector<int> dims);

  /// Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases, sub-seeded per
  /// parameter name; two constructions with equal seeds are bit-identical.
  void register_params(ParamSet& ps, std::uint64_t seed) const;

  Tensor forward(const ParamSet& ps, const Tensor& x, bool detached = false) const;

  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  const std::vector<int>& dims() const { return dims_; }
  std::vector<std::string> param_keys() const;

 private:
  std::string prefix_;
  std::vector<int> dims_;
};

/// Linear decision layer; probabilities via row-stable softmax.
class DecisionHead {
 public:
  DecisionHead() = default;
  DecisionHead(std::string prefix, int feature_dim, int classes);

  void register_params(ParamSet& ps, std::uint64_t seed) const;

  struct Out {
    Tensor logits;  // n x c
    Tensor probs;   // n x c
  };
  Out forward(const ParamSet& ps, const Tensor& features, bool detached = false) const;

  int classes() const { return classes_; }
  std::vector<std::string> param_keys() const;

 private:
  std::string prefix_;
  int feature_dim_ = 0;
  int classes_ = 0;
};

/// Variational conditional q(f_m | f_a): a diagonal Gaussian whose mean and
/// log-variance are MLP functions of f_a. log-variance is clamped to
/// [-8, 8] so the density stays finite under adversarial inputs and cannot
/// collapse during bound minimization.
class GaussianConditional {
 public:
  static constexpr double kLogVarLo = -8.0;
  static constexpr double kLogVarHi = 8.0;

  GaussianConditional() = default;
  GaussianConditional(std::string prefix, int cond_dim, std::vector<int> hidden, int target_dim);

  void register_params(ParamSet& ps, std::uint64_t seed) const;

  struct MeanLogVar {
    Tensor mu;      // n x d_m
    Tensor logvar;  // n x d_m, clamped
  };
  MeanLogVar condition(const ParamSet& ps, const Tensor& f_a, bool detach_params = false) const;

  /// Per-row log density of paired rows; rank-1 output of length n.
  Tensor log_q(const ParamSet& ps, const Tensor& f_a, const Tensor& f_m,
               bool detach_params = false) const;
  /// n x n grid; entry (i,j) = log q(f_m row j | f_a row i). Diagonal equals log_q.
  Tensor log_q_cross(const ParamSet& ps, const Tensor& f_a, const Tensor& f_m,
                     bool detach_params = false) const;

  int cond_dim() const { return mean_net_.input_dim(); }
  int target_dim() const { return mean_net_.output_dim(); }
  std::vector<std::string> param_keys() const;

 private:
  MlpEncoder mean_net_;
  MlpEncoder logvar_net_;
};

}  // namespace udi
