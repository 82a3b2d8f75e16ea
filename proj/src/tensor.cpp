#include "udi/tensor.hpp"

#include <unordered_set>

namespace udi {

std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::size_t shape_size(const std::vector<int>& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(s));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor Tensor::zeros(std::vector<int> shape) {
  auto n = std::make_shared<TensorNode>();
  n->data.assign(shape_size(shape), 0.0);
  n->shape = std::move(shape);
  return Tensor(std::move(n));
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  auto n = std::make_shared<TensorNode>();
  n->data.assign(shape_size(shape), value);
  n->shape = std::move(shape);
  return Tensor(std::move(n));
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data) {
  if (shape_size(shape) != data.size())
    throw ShapeError("shape " + shape_str(shape) + " does not match data length " +
                     std::to_string(data.size()));
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value) {
  auto n = std::make_shared<TensorNode>();
  n->shape = {};
  n->data = {value};
  return Tensor(std::move(n));
}

Tensor Tensor::param(std::vector<int> shape, std::vector<double> data) {
  Tensor t = from_data(std::move(shape), std::move(data));
  t.node_->requires_grad = true;
  return t;
}

int Tensor::rows() const {
  if (node_->shape.size() != 2)
    throw ShapeError("rows() on tensor of shape " + shape_str(node_->shape));
  return node_->shape[0];
}

int Tensor::cols() const {
  if (node_->shape.size() != 2)
    throw ShapeError("cols() on tensor of shape " + shape_str(node_->shape));
  return node_->shape[1];
}

double Tensor::value() const {
  if (size() != 1)
    throw ContractError("value() requires a scalar, got shape " + shape_str(node_->shape));
  return node_->data[0];
}

double Tensor::at(int i) const { return node_->data.at(static_cast<std::size_t>(i)); }

double Tensor::at(int i, int j) const {
  return node_->data.at(static_cast<std::size_t>(i) * cols() + j);
}

Tensor Tensor::detach() const {
  auto n = std::make_shared<TensorNode>();
  n->shape = node_->shape;
  n->data = node_->data;
  return Tensor(std::move(n));
}

Tensor Tensor::make_node(std::vector<int> shape, std::vector<double> data,
                         std::vector<Tensor> parents,
                         std::function<void(TensorNode&)> backward_fn) {
  if (shape_size(shape) != data.size())
    throw ShapeError("op output shape " + shape_str(shape) + " does not match data length " +
                     std::to_string(data.size()));
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  bool any = false;
  for (const Tensor& p : parents)
    if (p.requires_grad()) any = true;
  if (any) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

namespace {

// Iterative post-order DFS; visitation order depends only on graph structure.
std::vector<TensorNode*> topo_order(TensorNode* root) {
  std::vector<TensorNode*> topo;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* child = node->parents[next].node();
      ++next;
      if (child->requires_grad && !seen.count(child)) {
        seen.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }
  return topo;
}

}  // namespace

void Tensor::backward() const {
  if (size() != 1)
    throw ContractError("backward() requires a scalar root, got shape " +
                        shape_str(node_->shape));
  if (!node_->requires_grad) return;  // graph has no differentiable leaves

  std::vector<TensorNode*> topo = topo_order(node_.get());
  for (TensorNode* n : topo) {
    n->ensure_grad();
    if (n->backward_fn) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  node_->grad[0] += 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

std::vector<const TensorNode*> Tensor::reachable_leaves() const {
  std::vector<const TensorNode*> leaves;
  if (!node_->requires_grad) return leaves;
  for (TensorNode* n : topo_order(node_.get()))
    if (!n->backward_fn) leaves.push_back(n);
  return leaves;
}

}  // namespace udi
