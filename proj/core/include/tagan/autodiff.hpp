// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over dense tensors.
//
// A Graph owns its nodes and records operations in creation order; creation
// order is a topological order by construction, so backward() is a single
// reverse sweep that visits each node exactly once. Gradients accumulate
// additively across fan-out. A graph is confined to one logical thread;
// run independent graphs for parallelism.
#pragma once

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "tagan/param_store.hpp"
#include "tagan/tensor.hpp"

namespace tagan::ad {

template <typename S>
class Graph;

template <typename S>
struct Node {
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad;              // allocated iff needs_grad
  std::vector<Node<S>*> parents;
  std::function<void()> backward;   // empty for leaves
  Parameter<S>* param = nullptr;    // set for parameter leaves
  const char* op = "leaf";
  int id = 0;
  bool needs_grad = false;

  std::size_t numel() const { return value.size(); }
};

/// Lightweight handle to a node owned by a Graph.
template <typename S>
class Tensor {
public:
  Tensor() = default;
  Tensor(Node<S>* node, Graph<S>* graph) : node_(node), graph_(graph) {}

  bool valid() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->value.size(); }
  const std::vector<S>& value() const { return node_->value; }
  bool needs_grad() const { return node_->needs_grad; }
  int id() const { return node_->id; }

  /// Gradient buffer; throws if this tensor does not track gradients.
  const std::vector<S>& grad() const {
    if (!node_->needs_grad) {
      throw ContractError(std::string("tensor from op '") + node_->op +
                          "' does not track gradients");
    }
    return node_->grad;
  }

  /// Value of a single-element tensor.
  S item() const {
    if (numel() != 1) {
      throw ContractError("item() requires a scalar tensor, got shape " +
                          shape_str(node_->shape));
    }
    return node_->value[0];
  }

  Node<S>* node() const { return node_; }
  Graph<S>* graph() const { return graph_; }

private:
  Node<S>* node_ = nullptr;
  Graph<S>* graph_ = nullptr;
};

template <typename S>
class Graph {
public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// When set, every operation validates that its outputs are finite and
  /// throws NumericError naming the op otherwise.
  bool debug_checks = false;

  /// General leaf holding a value; tracks gradients when needs_grad is set.
  Tensor<S> leaf(TensorData<S> value, bool needs_grad = false);

  /// Leaf that never tracks gradients (inputs, detached values).
  Tensor<S> constant(TensorData<S> value) { return leaf(std::move(value), false); }
  Tensor<S> constant_scalar(S v) { return constant(TensorData<S>::scalar(v)); }

  /// Leaf bound to a stored parameter: copies the current value, tracks
  /// gradients, and remembers the parameter for harvest().
  Tensor<S> param(Parameter<S>& p);

  /// Same parameter values, but bound as a constant (frozen branch).
  Tensor<S> frozen(const Parameter<S>& p) { return constant(p.value); }

  /// Reverse sweep from a scalar loss. Seeds d(loss)/d(loss) = 1, clears
  /// intermediate gradients, and accumulates into leaf gradients (repeated
  /// calls keep accumulating until zero_grad()).
  void backward(const Tensor<S>& loss);

  /// Zero every gradient buffer in the graph.
  void zero_grad();

  /// Add scale * (gradient of each bound parameter) into Parameter::grad.
  /// Call on one thread at a time; with per-sample graphs, harvest in
  /// sample order for reproducible float accumulation.
  void harvest(S scale = S(1));

  /// Visit every parameter leaf with its accumulated gradient. Lets a
  /// worker extract compact gradients before discarding the graph.
  void visit_param_grads(
      const std::function<void(Parameter<S>*, const std::vector<S>&)>& fn) const;

  std::size_t node_count() const { return nodes_.size(); }

  /// Internal: allocate the next node. Used by the op implementations.
  Node<S>* make_node(Shape shape, std::vector<S> value,
                     std::vector<Node<S>*> parents, const char* op_name);

  Tensor<S> wrap(Node<S>* n) { return Tensor<S>(n, this); }

private:
  std::deque<Node<S>> nodes_;
};

// ---------------------------------------------------------------------------
// Operations. All inputs must belong to the same graph.
// ---------------------------------------------------------------------------

template <typename S> Tensor<S> add(Tensor<S> a, Tensor<S> b);
template <typename S> Tensor<S> sub(Tensor<S> a, Tensor<S> b);
template <typename S> Tensor<S> mul(Tensor<S> a, Tensor<S> b);  // elementwise
template <typename S> Tensor<S> add_scalar(Tensor<S> a, double c);
template <typename S> Tensor<S> mul_scalar(Tensor<S> a, double c);
template <typename S> Tensor<S> neg(Tensor<S> a);
template <typename S> Tensor<S> abs(Tensor<S> a);
template <typename S> Tensor<S> exp(Tensor<S> a);
template <typename S> Tensor<S> log(Tensor<S> a);
template <typename S> Tensor<S> tanh(Tensor<S> a);
template <typename S> Tensor<S> sigmoid(Tensor<S> a);
template <typename S> Tensor<S> leaky_relu(Tensor<S> a, double slope);
template <typename S> Tensor<S> clamp(Tensor<S> a, double lo, double hi);

template <typename S> Tensor<S> sum(Tensor<S> a);   // -> [1]
template <typename S> Tensor<S> mean(Tensor<S> a);  // -> [1]
template <typename S> Tensor<S> dot(Tensor<S> a, Tensor<S> b);  // [n],[n] -> [1]

template <typename S> Tensor<S> matmul(Tensor<S> a, Tensor<S> b);  // [m,k],[k,n]
template <typename S> Tensor<S> matvec(Tensor<S> a, Tensor<S> x);  // [m,k],[k]

template <typename S> Tensor<S> row(Tensor<S> a, int i);                  // [m,n] -> [n]
template <typename S> Tensor<S> slice(Tensor<S> a, int begin, int len);   // [n] -> [len]
template <typename S> Tensor<S> stack_rows(std::span<const Tensor<S>> rows);     // m x [n] -> [m,n]
template <typename S> Tensor<S> stack_scalars(std::span<const Tensor<S>> vals);  // m x [1] -> [m]
template <typename S> Tensor<S> mean_rows(Tensor<S> a);                   // [m,n] -> [n]

template <typename S> Tensor<S> softmax(Tensor<S> a);       // [n] -> [n]
template <typename S> Tensor<S> softmax_rows(Tensor<S> a);  // [m,n] -> [m,n]

/// Cross-correlation (deep-learning convention, no kernel flip).
/// x: [c_in,h,w], kernels: [c_out,c_in,k,k]; output [c_out,h',w'] with
/// h' = floor((h + 2*pad - k)/stride) + 1.
template <typename S>
Tensor<S> conv2d(Tensor<S> x, Tensor<S> kernels, int stride, int pad);

template <typename S> Tensor<S> add_channel_bias(Tensor<S> x, Tensor<S> bias);
template <typename S> Tensor<S> global_avg_pool(Tensor<S> x);      // [c,h,w] -> [c]
template <typename S> Tensor<S> upsample_nearest2x(Tensor<S> x);   // [c,h,w] -> [c,2h,2w]
template <typename S> Tensor<S> tile_spatial(Tensor<S> v, int h, int w);  // [c] -> [c,h,w]
template <typename S> Tensor<S> concat_channels(Tensor<S> a, Tensor<S> b);
template <typename S> Tensor<S> reshape(Tensor<S> a, Shape shape);

}  // namespace tagan::ad
