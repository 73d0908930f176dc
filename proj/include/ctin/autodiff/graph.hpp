#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ctin/autodiff/tensor.hpp"

namespace ctin::ad {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  std::vector<std::shared_ptr<Node>> parents;
  // Pushes this node's grad into its parents. Null for leaves.
  std::function<void(Node&)> backward;
  bool requires_grad = false;

  bool has_grad() const { return !grad_empty; }
  Tensor& ensure_grad();
  void clear_grad();

 private:
  bool grad_empty = true;
};

/// Handle to a node in the reverse-mode graph.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int axis) const { return node_->value.dim(axis); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return !node_->backward; }

  /// Accumulated gradient; zeros when nothing has flowed in yet.
  Tensor grad() const;
  void zero_grad() { node_->clear_grad(); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Tensor value);
Var parameter(Tensor value);

/// Creates an interior node. `backward` receives the node itself; parents are
/// reachable through node.parents in the order given here.
Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

/// Adds `delta` into the parent's gradient if it participates in the graph.
void accumulate(Node& parent, const Tensor& delta);

/// Reverse pass from a scalar. Interior gradients are recomputed on every
/// call; leaf gradients accumulate across calls until zero_grad().
void backward(const Var& loss);

}  // namespace ctin::ad
