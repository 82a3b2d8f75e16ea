#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "udi/errors.hpp"

namespace udi {

class Tensor;

/// Storage plus the optional record of the producing operation. One node per
/// value in a dynamic forward graph; the graph is rebuilt every step and
/// freed when the root handle goes out of scope.
struct TensorNode {
  std::vector<int> shape;            // rank 0 (scalar), 1 or 2
  std::vector<double> data;          // row-major
  std::vector<double> grad;          // allocated lazily, same length as data
  bool requires_grad = false;
  std::vector<Tensor> parents;       // inputs of the producing op
  std::function<void(TensorNode&)> backward_fn;  // reads grad, accumulates into parents

  std::size_t size() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

/// Value-semantic handle to a TensorNode. Copies share the node; detach()
/// makes an independent constant with the same values.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data);
  static Tensor scalar(double value);
  /// Leaf with requires_grad set; the unit every ParamSet entry is made of.
  static Tensor param(std::vector<int> shape, std::vector<double> data);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  std::size_t size() const { return node_->data.size(); }
  int rows() const;
  int cols() const;

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  std::span<const double> grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_->requires_grad; }

  double value() const;                  // scalar extraction
  double at(int i) const;                // rank-1 access
  double at(int i, int j) const;         // rank-2 access

  /// Constant copy of the values; cuts the graph and never carries gradient.
  Tensor detach() const;

  void zero_grad() {
    if (node_) node_->grad.assign(node_->data.size(), 0.0);
  }

  /// Reverse pass from a scalar root. Intermediate gradients are zeroed per
  /// pass; leaf gradients accumulate across passes until zero_grad().
  void backward() const;

  /// Leaf tensors reachable from this root through the recorded graph.
  std::vector<const TensorNode*> reachable_leaves() const;

  TensorNode* node() const { return node_.get(); }
  std::shared_ptr<TensorNode> shared_node() const { return node_; }

  /// Op-builder escape hatch; the ops module and tests construct graph nodes
  /// through this.
  static Tensor make_node(std::vector<int> shape, std::vector<double> data,
                          std::vector<Tensor> parents,
                          std::function<void(TensorNode&)> backward_fn);

 private:
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
  std::shared_ptr<TensorNode> node_;
};

std::string shape_str(const std::vector<int>& s);
std::size_t shape_size(const std::vector<int>& s);

}  // namespace udi
