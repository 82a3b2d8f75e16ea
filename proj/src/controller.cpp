#include "udi/controller.hpp"

#include <unordered_set>

namespace udi {

GradMap capture_grads(const Tensor& loss, ParamSet& params, const std::string& source) {
  GradMap out;
  out.source = source;

  params.zero_grads();
  loss.backward();

  std::unordered_set<const TensorNode*> reachable;
  for (const TensorNode* n : loss.reachable_leaves()) reachable.insert(n);

  for (const auto& e : params.entries()) {
    if (!reachable.count(e.value.node())) continue;
    out.g.emplace(e.key, std::vector<double>(e.value.grad().begin(), e.value.grad().end()));
  }
  params.zero_grads();

  out.empty_warning = out.g.empty();
  return out;
}

double alignment(const GradMap& g1, const GradMap& g2) {
  double dot = 0.0;
  for (const auto& [key, v1] : g1.g) {
    auto it = g2.g.find(key);
    if (it == g2.g.end()) continue;
    const auto& v2 = it->second;
    if (v1.size() != v2.size())
      throw ContractError("alignment: gradient length mismatch on shared key " + key);
    double s = 0.0;
    for (std::size_t i = 0; i < v1.size(); ++i) s += v1[i] * v2[i];
    dot += s;
  }
  return dot;
}

std::pair<double, double> compute_alphas(double xi_con, double xi_com, double epsilon) {
  if (epsilon <= 0.0) throw ContractError("compute_alphas: epsilon must be positive");
  const double pos_con = xi_con > 0.0 ? xi_con : 0.0;
  const double pos_com = xi_com > 0.0 ? xi_com : 0.0;
  const double denom = pos_con + pos_com + epsilon;
  return {pos_con / denom, pos_com / denom};
}

bool DynamicController::maybe_update(int epoch, const LossBuilders& builders, ParamSet& params) {
  if (epoch <= state_.epoch_of_last_update) return false;

  GradMap g_cls = capture_grads(builders.cls(), params, "cls");
  GradMap g_con = capture_grads(builders.con(), params, "con");
  GradMap g_com = capture_grads(builders.com(), params, "com");
  capture_count_ += 3;

  state_.xi_con = alignment(g_cls, g_con);
  state_.xi_com = alignment(g_cls, g_com);
  std::tie(state_.alpha_con, state_.alpha_com) =
      compute_alphas(state_.xi_con, state_.xi_com, state_.epsilon);
  state_.epoch_of_last_update = epoch;
  ++update_count_;
  return true;
}

}  // namespace udi
