#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "udi/paramset.hpp"

namespace udi {

/// Snapshot of per-parameter gradients from one isolated backward pass.
struct GradMap {
  std::string source;                              // which loss produced it
  std::map<std::string, std::vector<double>> g;    // key -> flat gradient
  bool empty_warning = false;                      // loss reached no parameter

  bool contains(const std::string& key) const { return g.count(key) > 0; }
};

/// zero grads -> backward -> snapshot gradients of parameters reachable from
/// the loss -> zero grads. Parameter values are untouched; keys the loss does
/// not depend on are absent from the map.
GradMap capture_grads(const Tensor& loss, ParamSet& params, const std::string& source);

/// Gradient inner product over the shared-key intersection; empty
/// intersection gives 0. Shape mismatch on a shared key means the parameter
/// registry is corrupted and raises a ContractError.
double alignment(const GradMap& g1, const GradMap& g2);

/// ReLU the alignments, then normalize: alpha_x = max(xi_x,0) / (sum + eps).
std::pair<double, double> compute_alphas(double xi_con, double xi_com, double epsilon);

struct ControllerState {
  double xi_con = 0.0;
  double xi_com = 0.0;
  double alpha_con = 0.5;  // even weighting until the first update fires
  double alpha_com = 0.5;
  double epsilon = 1e-8;
  int epoch_of_last_update = 0;
};

/// The dynamic aware mechanism. Once per epoch, on the first mini-batch seen
/// that epoch, it runs three isolated backward passes (task, consistency,
/// complementary) and refreshes the adaptive weights. Loss builders are
/// closures over the current batch so the controller stays independent of the
/// pipeline's types.
class DynamicController {
 public:
  explicit DynamicController(double epsilon = 1e-8) { state_.epsilon = epsilon; }

  struct LossBuilders {
    std::function<Tensor()> cls;
    std::function<Tensor()> con;
    std::function<Tensor()> com;
  };

  /// Fires at most once per epoch; returns true when the weights were
  /// recomputed on this call.
  bool maybe_update(int epoch, const LossBuilders& builders, ParamSet& params);

  const ControllerState& state() const { return state_; }
  int update_count() const { return update_count_; }
  int capture_count() const { return capture_count_; }

 private:
  ControllerState state_;
  int update_count_ = 0;
  int capture_count_ = 0;
};

}  // namespace udi
