#include "udi/nets.hpp"

#include <cmath>

#include "udi/rng.hpp"

namespace udi {

Tensor param_view(const ParamSet& ps, const std::string& key, bool detached) {
  const Tensor& p = ps.at(key);
  return detached ? p.detach() : p;
}

namespace {

Tensor glorot_uniform(int fan_in, int fan_out, std::uint64_t seed, const std::string& key) {
  Rng rng(seed, key);
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
  for (double& v : w) v = rng.uniform(-bound, bound);
  return Tensor::param({fan_in, fan_out}, std::move(w));
}

}  // namespace

MlpEncoder::MlpEncoder(std::string prefix, std::vector<int> dims)
    : prefix_(std::move(prefix)), dims_(std::move(dims)) {
  if (dims_.size() < 2) throw ContractError("MlpEncoder " + prefix_ + ": needs >= 2 dims");
  for (int d : dims_)
    if (d <= 0) throw ContractError("MlpEncoder " + prefix_ + ": non-positive layer dim");
}

void MlpEncoder::register_params(ParamSet& ps, std::uint64_t seed) const {
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const std::string w_key = prefix_ + ".l" + std::to_string(l) + ".W";
    const std::string b_key = prefix_ + ".l" + std::to_string(l) + ".b";
    ps.add(w_key, glorot_uniform(dims_[l], dims_[l + 1], seed, w_key));
    ps.add(b_key, Tensor::param({dims_[l + 1]}, std::vector<double>(dims_[l + 1], 0.0)));
  }
}

Tensor MlpEncoder::forward(const ParamSet& ps, const Tensor& x, bool detached) const {
  if (x.cols() != dims_.front())
    throw ShapeError("MlpEncoder " + prefix_ + ": input has " + std::to_string(x.cols()) +
                     " columns, expected " + std::to_string(dims_.front()));
  Tensor h = x;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const std::string layer = prefix_ + ".l" + std::to_string(l);
    h = add_rowvec(matmul(h, param_view(ps, layer + ".W", detached)),
                   param_view(ps, layer + ".b", detached));
    if (l + 2 < dims_.size()) h = relu(h);
  }
  return h;
}

std::vector<std::string> MlpEncoder::param_keys() const {
  std::vector<std::string> keys;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    keys.push_back(prefix_ + ".l" + std::to_string(l) + ".W");
    keys.push_back(prefix_ + ".l" + std::to_string(l) + ".b");
  }
  return keys;
}

DecisionHead::DecisionHead(std::string prefix, int feature_dim, int classes)
    : prefix_(std::move(prefix)), feature_dim_(feature_dim), classes_(classes) {
  if (feature_dim_ <= 0 || classes_ <= 0)
    throw ContractError("DecisionHead " + prefix_ + ": bad dims");
}

void DecisionHead::register_params(ParamSet& ps, std::uint64_t seed) const {
  // Heads start at zero: predictions begin uniform, logits grow only as the
  // loss warrants, and summation fusion of an untrained branch is exactly
  // the identity on the other branches' logits.
  (void)seed;
  ps.add(prefix_ + ".W",
         Tensor::param({feature_dim_, classes_},
                       std::vector<double>(static_cast<std::size_t>(feature_dim_) * classes_, 0.0)));
  ps.add(prefix_ + ".b", Tensor::param({classes_}, std::vector<double>(classes_, 0.0)));
}

DecisionHead::Out DecisionHead::forward(const ParamSet& ps, const Tensor& features,
                                        bool detached) const {
  Tensor logits = add_rowvec(matmul(features, param_view(ps, prefix_ + ".W", detached)),
                             param_view(ps, prefix_ + ".b", detached));
  return {logits, softmax_rows(logits)};
}

std::vector<std::string> DecisionHead::param_keys() const {
  return {prefix_ + ".W", prefix_ + ".b"};
}

GaussianConditional::GaussianConditional(std::string prefix, int cond_dim,
                                         std::vector<int> hidden, int target_dim) {
  std::vector<int> dims;
  dims.push_back(cond_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(target_dim);
  mean_net_ = MlpEncoder(prefix + ".mean", dims);
  logvar_net_ = MlpEncoder(prefix + ".logvar", dims);
}

void GaussianConditional::register_params(ParamSet& ps, std::uint64_t seed) const {
  mean_net_.register_params(ps, seed);
  logvar_net_.register_params(ps, seed);
}

GaussianConditional::MeanLogVar GaussianConditional::condition(const ParamSet& ps,
                                                               const Tensor& f_a,
                                                               bool detach_params) const {
  Tensor mu = mean_net_.forward(ps, f_a, detach_params);
  Tensor lv = clamp(logvar_net_.forward(ps, f_a, detach_params), kLogVarLo, kLogVarHi);
  return {mu, lv};
}

Tensor GaussianConditional::log_q(const ParamSet& ps, const Tensor& f_a, const Tensor& f_m,
                                  bool detach_params) const {
  if (f_a.rows() != f_m.rows())
    throw ShapeError("log_q: row counts differ, " + shape_str(f_a.shape()) + " vs " +
                     shape_str(f_m.shape()));
  auto [mu, lv] = condition(ps, f_a, detach_params);
  return gauss_logdensity(mu, lv, f_m);
}

Tensor GaussianConditional::log_q_cross(const ParamSet& ps, const Tensor& f_a, const Tensor& f_m,
                                        bool detach_params) const {
  if (f_a.rows() != f_m.rows())
    throw ShapeError("log_q_cross: row counts differ, " + shape_str(f_a.shape()) + " vs " +
                     shape_str(f_m.shape()));
  auto [mu, lv] = condition(ps, f_a, detach_params);
  return gauss_cross_logdensity(mu, lv, f_m);
}

std::vector<std::string> GaussianConditional::param_keys() const {
  std::vector<std::string> keys = mean_net_.param_keys();
  for (auto& k : logvar_net_.param_keys()) keys.push_back(k);
  return keys;
}

}  // namespace udi
