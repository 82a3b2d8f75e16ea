#include "udi/gradcheck.hpp"

#include <cmath>

namespace udi {

double grad_check(const std::function<Tensor()>& f, ParamSet& params, double h) {
  if (h <= 0.0) throw ContractError("grad_check: h must be positive");

  Tensor root = f();
  const double v0 = root.value();
  if (f().value() != v0)
    throw ContractError("grad_check: function is not deterministic");

  params.zero_grads();
  root.backward();

  // Snapshot the analytic gradient before finite differences touch anything.
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& e : params.entries())
    analytic.emplace_back(e.value.grad().begin(), e.value.grad().end());

  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < params.entries().size(); ++pi) {
    auto& e = params.entries()[pi];
    auto data = e.value.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      const double fp = f().value();
      data[i] = orig - h;
      const double fm = f().value();
      data[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double a = analytic[pi].empty() ? 0.0 : analytic[pi][i];
      const double rel = std::fabs(a - fd) / std::max(1.0, std::fabs(a));
      if (rel > max_rel) max_rel = rel;
    }
  }
  return max_rel;
}

}  // namespace udi
