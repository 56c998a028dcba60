// SPDX-License-Identifier: Apache-2.0
#include "tagan/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

namespace tagan::ad {

namespace {

template <typename S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using EVec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MatMap = Eigen::Map<EMat<S>>;
template <typename S>
using CMatMap = Eigen::Map<const EMat<S>>;
template <typename S>
using VecMap = Eigen::Map<EVec<S>>;
template <typename S>
using CVecMap = Eigen::Map<const EVec<S>>;

template <typename S>
void require_same_graph(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.graph() != b.graph()) {
    throw ContractError("operands belong to different graphs");
  }
}

template <typename S>
void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename S>
void require_rank(const Tensor<S>& a, std::size_t rank, const char* op) {
  if (a.shape().size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + " tensor, got " +
                         shape_str(a.shape()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

template <typename S>
Node<S>* Graph<S>::make_node(Shape shape, std::vector<S> value,
                             std::vector<Node<S>*> parents, const char* op_name) {
  nodes_.emplace_back();
  Node<S>& n = nodes_.back();
  n.shape = std::move(shape);
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.op = op_name;
  n.id = static_cast<int>(nodes_.size()) - 1;
  for (Node<S>* p : n.parents) {
    if (p->needs_grad) n.needs_grad = true;
  }
  if (n.needs_grad) n.grad.assign(n.value.size(), S(0));
  if (debug_checks) {
    for (const S& v : n.value) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw NumericError(std::string("non-finite value produced by op '") +
                           op_name + "'");
      }
    }
  }
  return &n;
}

template <typename S>
Tensor<S> Graph<S>::leaf(TensorData<S> value, bool needs_grad) {
  Node<S>* n = make_node(std::move(value.shape), std::move(value.data), {}, "leaf");
  if (needs_grad) {
    n->needs_grad = true;
    n->grad.assign(n->value.size(), S(0));
  }
  return wrap(n);
}

template <typename S>
Tensor<S> Graph<S>::param(Parameter<S>& p) {
  Tensor<S> t = leaf(p.value, true);
  t.node()->param = &p;
  t.node()->op = "param";
  return t;
}

template <typename S>
void Graph<S>::backward(const Tensor<S>& loss) {
  if (loss.graph() != this) {
    throw ContractError("backward: loss belongs to a different graph");
  }
  if (loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_str(loss.shape()));
  }
  if (!loss.node()->needs_grad) return;  // nothing reachable tracks gradients

  // Clear intermediate gradients so repeated backward calls only ever
  // accumulate into leaves.
  const int loss_id = loss.id();
  for (Node<S>& n : nodes_) {
    if (n.needs_grad && n.backward) {
      std::fill(n.grad.begin(), n.grad.end(), S(0));
    }
  }
  loss.node()->grad[0] += S(1);

  for (int i = loss_id; i >= 0; --i) {
    Node<S>& n = nodes_[static_cast<std::size_t>(i)];
    if (n.needs_grad && n.backward) n.backward();
  }
}

template <typename S>
void Graph<S>::zero_grad() {
  for (Node<S>& n : nodes_) {
    if (n.needs_grad) std::fill(n.grad.begin(), n.grad.end(), S(0));
  }
}

template <typename S>
void Graph<S>::harvest(S scale) {
  for (Node<S>& n : nodes_) {
    if (n.param == nullptr) continue;
    auto& dst = n.param->grad.data;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * n.grad[i];
  }
}

template <typename S>
void Graph<S>::visit_param_grads(
    const std::function<void(Parameter<S>*, const std::vector<S>&)>& fn) const {
  for (const Node<S>& n : nodes_) {
    if (n.param != nullptr) fn(n.param, n.grad);
  }
}

// ---------------------------------------------------------------------------
// Elementwise operations
// ---------------------------------------------------------------------------

namespace {

/// Shared scaffolding for unary elementwise ops: fwd maps value, dfn maps
/// (x, y, gout) -> gradient contribution for x.
template <typename S, typename Fwd, typename Bwd>
Tensor<S> unary_elementwise(Tensor<S> a, const char* name, Fwd fwd, Bwd bwd) {
  std::vector<S> out(a.numel());
  const auto& x = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
  Node<S>* n = a.graph()->make_node(a.shape(), std::move(out), {a.node()}, name);
  if (n->needs_grad) {
    Node<S>* pa = a.node();
    n->backward = [n, pa, bwd] {
      for (std::size_t i = 0; i < n->value.size(); ++i) {
        pa->grad[i] += bwd(pa->value[i], n->value[i], n->grad[i]);
      }
    };
  }
  return a.graph()->wrap(n);
}

}  // namespace

template <typename S>
Tensor<S> add(Tensor<S> a, Tensor<S> b) {
  require_same_graph(a, b);
  require_same_shape(a, b, "add");
  std::vector<S> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  Node<S>* n = a.graph()->make_node(a.shape(), std::move(out),
                                    {a.node(), b.node()}, "add");
  if (n->needs_grad) {
    Node<S>* pa = a.node();
    Node<S>* pb = b.node();
    n->backward = [n, pa, pb] {
      if (pa->needs_grad) {
        for (std::size_t i = 0; i < n->grad.size(); ++i) pa->grad[i] += n->grad[i];
      }
      if (pb->needs_grad) {
        for (std::size_t i = 0; i < n->grad.size(); ++i) pb->grad[i] += n->grad[i];
      }
    };
  }
  return a.graph()->wrap(n);
}

template <typename S>
Tensor<S> sub(Tensor<S> a, Tensor<S> b) {
  require_same_graph(a, b);
  require_same_shape(a, b, "sub");
  std::vector<S> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  Node<S>* n = a.graph()->make_node(a.shape(), std::move(out),
                                    {a.node(), b.node()}, "sub");
  if (n->needs_grad) {
    Node<S>* pa = a.node();
    Node<S>* pb = b.node();
    n->backward = [n, pa, pb] {
      if (pa->needs_grad) {
        for (std::size_t i = 0; i < n->grad.size(); ++i) pa->grad[i] += n->grad[i];
      }
      if (pb->needs_grad) {
        for (std::size_t i = 0; i < n->grad.size(); ++i) pb->grad[i] -= n->grad[i];
      }
    };
  }
  return a.graph()->wrap(n);
}

template <typename S>
Tensor<S> mul(Tensor<S> a, Tensor<S> b) {
  require_same_graph(a, b);
  require_same_shape(a, b, "mul");
  std::vector<S> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  Node<S>* n = a.graph()->make_node(a.shape(), std::move(out),
                                    {a.node(), b.node()}, "mul");
  if (n->needs_grad) {
    Node<S>* pa = a.node();
    Node<S>* pb = b.node();
    n->backward = [n, pa, pb] {
      if (pa->needs_grad) {
        for (std::size_t i = 0; i < n->grad.size(); ++i) {
          pa->grad[i] += n->grad[i] * pb->value[i];
        }
      }
      if (pb->needs_grad) {
        for (std::size_t i = 0; i < n->grad.size(); ++i) {
          pb->grad[i] += n->grad[i] * pa->value[i];
        }
      }
    };
  }
  return a.graph()->wrap(n);
}

template <typename S>
Tensor<S> add_scalar(Tensor<S> a, double c) {
  const S cs = static_cast<S>(c);
  return unary_elementwise(
      a, "add_scalar", [cs](S x) { return x + cs; },
      [](S, S, S g) { return g; });
}

template <typename S>
Tensor<S> mul_scalar(Tensor<S> a, double c) {
  const S cs = static_cast<S>(c);
  return unary_elementwise(
      a, "mul_scalar", [cs](S x) { return x * cs; },
      [cs](S, S, S g) { return g * cs; });
}

template <typename S>
Tensor<S> neg(Tensor<S> a) {
  return unary_elementwise(
      a, "neg", [](S x) { return -x; }, [](S, S, S g) { return -g; });
}

template <typename S>
Tensor<S> abs(Tensor<S> a) {
  return unary_elementwise(
      a, "abs", [](S x) { return x < S(0) ? -x : x; },
      [](S x, S, S g) { return x > S(0) ? g : (x < S(0) ? -g : S(0)); });
}

template <typename S>
Tensor<S> exp(Tensor<S> a) {
  return unary_elementwise(
      a, "exp", [](S x) { return std::exp(x); },
      [](S, S y, S g) { return g * y; });
}

template <typename S>
Tensor<S> log(Tensor<S> a) {
  return unary_elementwise(
      a, "log", [](S x) { return std::log(x); },
      [](S x, S, S g) { return g / x; });
}

template <typename S>
Tensor<S> tanh(Tensor<S> a) {
  return unary_elementwise(
      a, "tanh", [](S x) { return std::tanh(x); },
      [](S, S y, S g) { return g * (S(1) - y * y); });
}

template <typename S>
Tensor<S> sigmoid(Tensor<S> a) {
  // Branch on sign so large |x| saturates without overflow.
  return unary_elementwise(
      a, "sigmoid",
      [](S x) {
        if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
        const S e = std::exp(x);
        return e / (S(1) + e);
      },
      [](S, S y, S g) { return g * y * (S(1) - y); });
}

template <typename S>
Tensor<S> leaky_relu(Tensor<S> a, double slope) {
  const S k = static_cast<S>(slope);
  return unary_elementwise(
      a, "leaky_relu", [k](S x) { return x > S(0) ? x : k * x; },
      [k](S x, S, S g) { return x > S(0) ? g : k * g; });
}

template <typename S>
Tensor<S> clamp(Tensor<S> a, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lo must not exceed hi");
  const S l = static_cast<S>(lo);
  const S h = static_cast<S>(hi);
  return unary_elementwise(
      a, "clamp", [l, h](S x) { return x < l ? l : (x > h ? h : x); },
      [l, h](S x, S, S g) { return (x >= l && x <= h) ? g : S(0); });
}

// ---------------------------------------------------------------------------
// Reductions and vector products
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> sum(Tensor<S> a) {
  S acc = S(0);
  for (const S& v : a.value()) acc += v;
  Node<S>* n = a.graph()->make_node({1}, {acc}, {a.node()}, "sum");
  if (n->needs_grad) {
    Node<S>* pa = a.node();
    n->backward = [n, pa] {
      const S g = n->grad[0];
      for (auto& gv : pa->grad) gv += g;
    };
  }
  return a.graph()->wrap(n);
}

template <typename S>
Tensor<S> mean(Tensor<S> a) {
  S acc = S(0);
  for (const S& v : a.value()) acc += v;
  const S inv = S(1) / static_cast<S>(a.numel());
  Node<S>* n = a.graph()->make_node({1}, {acc * inv}, {a.node()}, "mean");
  if (n->needs_grad) {
    Node<S>* pa = a.node();
    n->backward = [n, pa, inv] {
      const S g = n->grad[0] * inv;
      for (auto& gv : pa->grad) gv += g;
    };
  }
  return a.graph()->wrap(n);
}

template <typename S>
Tensor<S> dot(Tensor<S> a, Tensor<S> b) {
  require_same_graph(a, b);
  require_rank(a, 1, "dot");
  require_same_shape(a, b, "dot");
  S acc = S(0);
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a.value()[i] * b.value()[i];
  Node<S>* n = a.graph()->make_node({1}, {acc}, {a.node(), b.node()}, "dot");
  if (n->needs_grad) {
    Node<S>* pa = a.node();
    Node<S>* pb = b.node();
    n->backward = [n, pa, pb] {
      const S g = n->grad[0];
      if (pa->needs_grad) {
        for (std::size_t i = 0; i < pa->grad.size(); ++i) {
          pa->grad[i] += g * pb->value[i];
        }
      }
      if (pb->needs_grad) {
        for (std::size_t i = 0; i < pb->grad.size(); ++i) {
          pb->grad[i] += g * pa->value[i];
        }
      }
    };
  }
  return a.graph()->wrap(n);
}

// ---------------------------------------------------------------------------
// Matrix operations (Eigen-backed inner kernels)
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> matmul(Tensor<S> a, Tensor<S> b) {
  require_same_graph(a, b);
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const int m = a.shape()[0], k = a.shape()[1];
  const int k2 = b.shape()[0], n_cols = b.shape()[1];
  if (k != k2) {
    throw DimensionError("matmul: inner dimensions differ, " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<S> out(static_cast<std::size_t>(m) * n_cols);
  CMatMap<S> A(a.value().data(), m, k);
  CMatMap<S> B(b.value().data(), k, n_cols);
  MatMap<S> C(out.data(), m, n_cols);
  C.noalias() = A * B;
  Node<S>* node =
      a.graph()->make_node({m, n_cols}, std::move(out), {a.node(), b.node()}, "matmul");
  if (node->needs_grad) {
    Node<S>* pa = a.node();
    Node<S>* pb = b.node();
    node->backward = [node, pa, pb, m, k, n_cols] {
      CMatMap<S> dC(node->grad.data(), m, n_cols);
      if (pa->needs_grad) {
        CMatMap<S> B(pb->value.data(), k, n_cols);
        MatMap<S> dA(pa->grad.data(), m, k);
        dA.noalias() += dC * B.transpose();
      }
      if (pb->needs_grad) {
        CMatMap<S> A(pa->value.data(), m, k);
        MatMap<S> dB(pb->grad.data(), k, n_cols);
        dB.noalias() += A.transpose() * dC;
      }
    };
  }
  return a.graph()->wrap(node);
}

template <typename S>
Tensor<S> matvec(Tensor<S> a, Tensor<S> x) {
  require_same_graph(a, x);
  require_rank(a, 2, "matvec");
  require_rank(x, 1, "matvec");
  const int m = a.shape()[0], k = a.shape()[1];
  if (x.shape()[0] != k) {
    throw DimensionError("matvec: " + shape_str(a.shape()) + " vs " +
                         shape_str(x.shape()));
  }
  std::vector<S> out(static_cast<std::size_t>(m));
  CMatMap<S> A(a.value().data(), m, k);
  CVecMap<S> X(x.value().data(), k);
  VecMap<S> Y(out.data(), m);
  Y.noalias() = A * X;
  Node<S>* node = a.graph()->make_node({m}, std::move(out), {a.node(), x.node()}, "matvec");
  if (node->needs_grad) {
    Node<S>* pa = a.node();
    Node<S>* px = x.node();
    node->backward = [node, pa, px, m, k] {
      CVecMap<S> dY(node->grad.data(), m);
      if (pa->needs_grad) {
        CVecMap<S> X(px->value.data(), k);
        MatMap<S> dA(pa->grad.data(), m, k);
        dA.noalias() += dY * X.transpose();
      }
      if (px->needs_grad) {
        CMatMap<S> A(pa->value.data(), m, k);
        VecMap<S> dX(px->grad.data(), k);
        dX.noalias() += A.transpose() * dY;
      }
    };
  }
  return a.graph()->wrap(node);
}

// ---------------------------------------------------------------------------
// Row manipulation
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> row(Tensor<S> a, int i) {
  require_rank(a, 2, "row");
  const int m = a.shape()[0], n_cols = a.shape()[1];
  if (i < 0 || i >= m) {
    throw ContractError("row index " + std::to_string(i) + " out of range [0," +
                        std::to_string(m) + ")");
  }
  const S* src = a.value().data() + static_cast<std::size_t>(i) * n_cols;
  std::vector<S> out(src, src + n_cols);
  Node<S>* node = a.graph()->make_node({n_cols}, std::move(out), {a.node()}, "row");
  if (node->needs_grad) {
    Node<S>* pa = a.node();
    node->backward = [node, pa, i, n_cols] {
      S* dst = pa->grad.data() + static_cast<std::size_t>(i) * n_cols;
      for (int j = 0; j < n_cols; ++j) dst[j] += node->grad[j];
    };
  }
  return a.graph()->wrap(node);
}

template <typename S>
Tensor<S> slice(Tensor<S> a, int begin, int len) {
  require_rank(a, 1, "slice");
  const int n = a.shape()[0];
  if (begin < 0 || len < 1 || begin + len > n) {
    throw ContractError("slice [" + std::to_string(begin) + ", " +
                        std::to_string(begin + len) + ") out of range for length " +
                        std::to_string(n));
  }
  std::vector<S> out(a.value().begin() + begin, a.value().begin() + begin + len);
  Node<S>* node = a.graph()->make_node({len}, std::move(out), {a.node()}, "slice");
  if (node->needs_grad) {
    Node<S>* pa = a.node();
    node->backward = [node, pa, begin, len] {
      for (int i = 0; i < len; ++i) pa->grad[begin + i] += node->grad[i];
    };
  }
  return a.graph()->wrap(node);
}

template <typename S>
Tensor<S> stack_rows(std::span<const Tensor<S>> rows) {
  if (rows.empty()) throw ContractError("stack_rows: empty input");
  Graph<S>* g = rows[0].graph();
  const int n_cols = static_cast<int>(rows[0].numel());
  std::vector<S> out;
  out.reserve(rows.size() * n_cols);
  std::vector<Node<S>*> parents;
  parents.reserve(rows.size());
  for (const Tensor<S>& r : rows) {
    require_same_graph(rows[0], r);
    require_rank(r, 1, "stack_rows");
    if (static_cast<int>(r.numel()) != n_cols) {
      throw DimensionError("stack_rows: rows have differing lengths");
    }
    out.insert(out.end(), r.value().begin(), r.value().end());
    parents.push_back(r.node());
  }
  Node<S>* node = g->make_node({static_cast<int>(rows.size()), n_cols},
                               std::move(out), std::move(parents), "stack_rows");
  if (node->needs_grad) {
    node->backward = [node, n_cols] {
      for (std::size_t r = 0; r < node->parents.size(); ++r) {
        Node<S>* p = node->parents[r];
        if (!p->needs_grad) continue;
        const S* src = node->grad.data() + r * n_cols;
        for (int j = 0; j < n_cols; ++j) p->grad[j] += src[j];
      }
    };
  }
  return g->wrap(node);
}

template <typename S>
Tensor<S> stack_scalars(std::span<const Tensor<S>> vals) {
  if (vals.empty()) throw ContractError("stack_scalars: empty input");
  Graph<S>* g = vals[0].graph();
  std::vector<S> out;
  out.reserve(vals.size());
  std::vector<Node<S>*> parents;
  parents.reserve(vals.size());
  for (const Tensor<S>& v : vals) {
    require_same_graph(vals[0], v);
    if (v.numel() != 1) {
      throw DimensionError("stack_scalars: all inputs must be scalars");
    }
    out.push_back(v.value()[0]);
    parents.push_back(v.node());
  }
  Node<S>* node = g->make_node({static_cast<int>(vals.size())}, std::move(out),
                               std::move(parents), "stack_scalars");
  if (node->needs_grad) {
    node->backward = [node] {
      for (std::size_t i = 0; i < node->parents.size(); ++i) {
        Node<S>* p = node->parents[i];
        if (p->needs_grad) p->grad[0] += node->grad[i];
      }
    };
  }
  return g->wrap(node);
}

template <typename S>
Tensor<S> mean_rows(Tensor<S> a) {
  require_rank(a, 2, "mean_rows");
  const int m = a.shape()[0], n_cols = a.shape()[1];
  std::vector<S> out(static_cast<std::size_t>(n_cols), S(0));
  for (int i = 0; i < m; ++i) {
    const S* src = a.value().data() + static_cast<std::size_t>(i) * n_cols;
    for (int j = 0; j < n_cols; ++j) out[j] += src[j];
  }
  const S inv = S(1) / static_cast<S>(m);
  for (auto& v : out) v *= inv;
  Node<S>* node = a.graph()->make_node({n_cols}, std::move(out), {a.node()}, "mean_rows");
  if (node->needs_grad) {
    Node<S>* pa = a.node();
    node->backward = [node, pa, m, n_cols, inv] {
      for (int i = 0; i < m; ++i) {
        S* dst = pa->grad.data() + static_cast<std::size_t>(i) * n_cols;
        for (int j = 0; j < n_cols; ++j) dst[j] += node->grad[j] * inv;
      }
    };
  }
  return a.graph()->wrap(node);
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

namespace {

template <typename S>
void softmax_row_fwd(const S* x, S* y, int n) {
  S mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  S denom = S(0);
  for (int i = 0; i < n; ++i) {
    y[i] = std::exp(x[i] - mx);
    denom += y[i];
  }
  const S inv = S(1) / denom;
  for (int i = 0; i < n; ++i) y[i] *= inv;
}

template <typename S>
void softmax_row_bwd(const S* y, const S* gout, S* gin, int n) {
  S dot_gy = S(0);
  for (int i = 0; i < n; ++i) dot_gy += gout[i] * y[i];
  for (int i = 0; i < n; ++i) gin[i] += y[i] * (gout[i] - dot_gy);
}

}  // namespace

template <typename S>
Tensor<S> softmax(Tensor<S> a) {
  require_rank(a, 1, "softmax");
  const int n = a.shape()[0];
  std::vector<S> out(static_cast<std::size_t>(n));
  softmax_row_fwd(a.value().data(), out.data(), n);
  Node<S>* node = a.graph()->make_node({n}, std::move(out), {a.node()}, "softmax");
  if (node->needs_grad) {
    Node<S>* pa = a.node();
    node->backward = [node, pa, n] {
      softmax_row_bwd(node->value.data(), node->grad.data(), pa->grad.data(), n);
    };
  }
  return a.graph()->wrap(node);
}

template <typename S>
Tensor<S> softmax_rows(Tensor<S> a) {
  require_rank(a, 2, "softmax_rows");
  const int m = a.shape()[0], n = a.shape()[1];
  std::vector<S> out(a.numel());
  for (int i = 0; i < m; ++i) {
    softmax_row_fwd(a.value().data() + static_cast<std::size_t>(i) * n,
                    out.data() + static_cast<std::size_t>(i) * n, n);
  }
  Node<S>* node =
      a.graph()->make_node(a.shape(), std::move(out), {a.node()}, "softmax_rows");
  if (node->needs_grad) {
    Node<S>* pa = a.node();
    node->backward = [node, pa, m, n] {
      for (int i = 0; i < m; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * n;
        softmax_row_bwd(node->value.data() + off, node->grad.data() + off,
                        pa->grad.data() + off, n);
      }
    };
  }
  return a.graph()->wrap(node);
}

// ---------------------------------------------------------------------------
// Convolution and spatial operations
// ---------------------------------------------------------------------------

namespace {

/// Gather padded input patches into a [c_in*k*k, out_h*out_w] matrix.
template <typename S>
void im2col(const S* x, int c_in, int h, int w, int k, int stride, int pad,
            int out_h, int out_w, S* cols) {
  const int positions = out_h * out_w;
  std::size_t r = 0;
  for (int c = 0; c < c_in; ++c) {
    const S* plane = x + static_cast<std::size_t>(c) * h * w;
    for (int ku = 0; ku < k; ++ku) {
      for (int kv = 0; kv < k; ++kv, ++r) {
        S* dst = cols + r * positions;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ku;
          if (iy < 0 || iy >= h) {
            for (int ox = 0; ox < out_w; ++ox) dst[oy * out_w + ox] = S(0);
            continue;
          }
          const S* src_row = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kv;
            dst[oy * out_w + ox] = (ix >= 0 && ix < w) ? src_row[ix] : S(0);
          }
        }
      }
    }
  }
}

/// Scatter-add the column gradient back onto the (unpadded) input gradient.
template <typename S>
void col2im_add(const S* cols, int c_in, int h, int w, int k, int stride,
                int pad, int out_h, int out_w, S* dx) {
  const int positions = out_h * out_w;
  std::size_t r = 0;
  for (int c = 0; c < c_in; ++c) {
    S* plane = dx + static_cast<std::size_t>(c) * h * w;
    for (int ku = 0; ku < k; ++ku) {
      for (int kv = 0; kv < k; ++kv, ++r) {
        const S* src = cols + r * positions;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ku;
          if (iy < 0 || iy >= h) continue;
          S* dst_row = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kv;
            if (ix >= 0 && ix < w) dst_row[ix] += src[oy * out_w + ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename S>
Tensor<S> conv2d(Tensor<S> x, Tensor<S> kernels, int stride, int pad) {
  require_same_graph(x, kernels);
  require_rank(x, 3, "conv2d");
  require_rank(kernels, 4, "conv2d");
  const int c_in = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const int c_out = kernels.shape()[0];
  const int k = kernels.shape()[2];
  if (kernels.shape()[1] != c_in) {
    throw DimensionError("conv2d: kernel expects " +
                         std::to_string(kernels.shape()[1]) + " input channels, image has " +
                         std::to_string(c_in));
  }
  if (kernels.shape()[3] != k) {
    throw DimensionError("conv2d: only square kernels are supported, got " +
                         shape_str(kernels.shape()));
  }
  if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
  if (pad < 0) throw ContractError("conv2d: pad must be >= 0");
  if (k > h + 2 * pad || k > w + 2 * pad) {
    throw DimensionError("conv2d: kernel size " + std::to_string(k) +
                         " exceeds padded input " + std::to_string(h + 2 * pad) +
                         "x" + std::to_string(w + 2 * pad));
  }
  const int out_h = (h + 2 * pad - k) / stride + 1;
  const int out_w = (w + 2 * pad - k) / stride + 1;
  const int positions = out_h * out_w;
  const int patch = c_in * k * k;

  std::vector<S> cols(static_cast<std::size_t>(patch) * positions);
  im2col(x.value().data(), c_in, h, w, k, stride, pad, out_h, out_w, cols.data());

  std::vector<S> out(static_cast<std::size_t>(c_out) * positions);
  {
    CMatMap<S> K(kernels.value().data(), c_out, patch);
    CMatMap<S> C(cols.data(), patch, positions);
    MatMap<S> Y(out.data(), c_out, positions);
    Y.noalias() = K * C;
  }

  Node<S>* node = x.graph()->make_node({c_out, out_h, out_w}, std::move(out),
                                       {x.node(), kernels.node()}, "conv2d");
  if (node->needs_grad) {
    Node<S>* px = x.node();
    Node<S>* pk = kernels.node();
    // The patch matrix is cached for the backward pass.
    node->backward = [node, px, pk, cols = std::move(cols), c_in, h, w, k,
                      stride, pad, out_h, out_w, positions, patch, c_out] {
      CMatMap<S> dY(node->grad.data(), c_out, positions);
      if (pk->needs_grad) {
        CMatMap<S> C(cols.data(), patch, positions);
        MatMap<S> dK(pk->grad.data(), c_out, patch);
        dK.noalias() += dY * C.transpose();
      }
      if (px->needs_grad) {
        std::vector<S> dcols(static_cast<std::size_t>(patch) * positions);
        CMatMap<S> K(pk->value.data(), c_out, patch);
        MatMap<S> dC(dcols.data(), patch, positions);
        dC.noalias() = K.transpose() * dY;
        col2im_add(dcols.data(), c_in, h, w, k, stride, pad, out_h, out_w,
                   px->grad.data());
      }
    };
  }
  return x.graph()->wrap(node);
}

template <typename S>
Tensor<S> add_channel_bias(Tensor<S> x, Tensor<S> bias) {
  require_same_graph(x, bias);
  require_rank(x, 3, "add_channel_bias");
  require_rank(bias, 1, "add_channel_bias");
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  if (bias.shape()[0] != c) {
    throw DimensionError("add_channel_bias: " + shape_str(x.shape()) + " vs " +
                         shape_str(bias.shape()));
  }
  const int hw = h * w;
  std::vector<S> out(x.numel());
  for (int ch = 0; ch < c; ++ch) {
    const S b = bias.value()[ch];
    const S* src = x.value().data() + static_cast<std::size_t>(ch) * hw;
    S* dst = out.data() + static_cast<std::size_t>(ch) * hw;
    for (int i = 0; i < hw; ++i) dst[i] = src[i] + b;
  }
  Node<S>* node = x.graph()->make_node(x.shape(), std::move(out),
                                       {x.node(), bias.node()}, "add_channel_bias");
  if (node->needs_grad) {
    Node<S>* px = x.node();
    Node<S>* pb = bias.node();
    node->backward = [node, px, pb, c, hw] {
      if (px->needs_grad) {
        for (std::size_t i = 0; i < node->grad.size(); ++i) {
          px->grad[i] += node->grad[i];
        }
      }
      if (pb->needs_grad) {
        for (int ch = 0; ch < c; ++ch) {
          const S* g = node->grad.data() + static_cast<std::size_t>(ch) * hw;
          S acc = S(0);
          for (int i = 0; i < hw; ++i) acc += g[i];
          pb->grad[ch] += acc;
        }
      }
    };
  }
  return x.graph()->wrap(node);
}

template <typename S>
Tensor<S> global_avg_pool(Tensor<S> x) {
  require_rank(x, 3, "global_avg_pool");
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const int hw = h * w;
  const S inv = S(1) / static_cast<S>(hw);
  std::vector<S> out(static_cast<std::size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    const S* src = x.value().data() + static_cast<std::size_t>(ch) * hw;
    S acc = S(0);
    for (int i = 0; i < hw; ++i) acc += src[i];
    out[ch] = acc * inv;
  }
  Node<S>* node = x.graph()->make_node({c}, std::move(out), {x.node()}, "global_avg_pool");
  if (node->needs_grad) {
    Node<S>* px = x.node();
    node->backward = [node, px, c, hw, inv] {
      for (int ch = 0; ch < c; ++ch) {
        const S g = node->grad[ch] * inv;
        S* dst = px->grad.data() + static_cast<std::size_t>(ch) * hw;
        for (int i = 0; i < hw; ++i) dst[i] += g;
      }
    };
  }
  return x.graph()->wrap(node);
}

template <typename S>
Tensor<S> upsample_nearest2x(Tensor<S> x) {
  require_rank(x, 3, "upsample_nearest2x");
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const int oh = 2 * h, ow = 2 * w;
  std::vector<S> out(static_cast<std::size_t>(c) * oh * ow);
  for (int ch = 0; ch < c; ++ch) {
    const S* src = x.value().data() + static_cast<std::size_t>(ch) * h * w;
    S* dst = out.data() + static_cast<std::size_t>(ch) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      const S* srow = src + static_cast<std::size_t>(y / 2) * w;
      S* drow = dst + static_cast<std::size_t>(y) * ow;
      for (int z = 0; z < ow; ++z) drow[z] = srow[z / 2];
    }
  }
  Node<S>* node = x.graph()->make_node({c, oh, ow}, std::move(out), {x.node()},
                                       "upsample_nearest2x");
  if (node->needs_grad) {
    Node<S>* px = x.node();
    node->backward = [node, px, c, h, w, oh, ow] {
      for (int ch = 0; ch < c; ++ch) {
        const S* g = node->grad.data() + static_cast<std::size_t>(ch) * oh * ow;
        S* dst = px->grad.data() + static_cast<std::size_t>(ch) * h * w;
        for (int y = 0; y < oh; ++y) {
          S* drow = dst + static_cast<std::size_t>(y / 2) * w;
          const S* grow = g + static_cast<std::size_t>(y) * ow;
          for (int z = 0; z < ow; ++z) drow[z / 2] += grow[z];
        }
      }
    };
  }
  return x.graph()->wrap(node);
}

template <typename S>
Tensor<S> tile_spatial(Tensor<S> v, int h, int w) {
  require_rank(v, 1, "tile_spatial");
  if (h < 1 || w < 1) throw ContractError("tile_spatial: h and w must be >= 1");
  const int c = v.shape()[0];
  const int hw = h * w;
  std::vector<S> out(static_cast<std::size_t>(c) * hw);
  for (int ch = 0; ch < c; ++ch) {
    const S val = v.value()[ch];
    S* dst = out.data() + static_cast<std::size_t>(ch) * hw;
    for (int i = 0; i < hw; ++i) dst[i] = val;
  }
  Node<S>* node =
      v.graph()->make_node({c, h, w}, std::move(out), {v.node()}, "tile_spatial");
  if (node->needs_grad) {
    Node<S>* pv = v.node();
    node->backward = [node, pv, c, hw] {
      for (int ch = 0; ch < c; ++ch) {
        const S* g = node->grad.data() + static_cast<std::size_t>(ch) * hw;
        S acc = S(0);
        for (int i = 0; i < hw; ++i) acc += g[i];
        pv->grad[ch] += acc;
      }
    };
  }
  return v.graph()->wrap(node);
}

template <typename S>
Tensor<S> concat_channels(Tensor<S> a, Tensor<S> b) {
  require_same_graph(a, b);
  require_rank(a, 3, "concat_channels");
  require_rank(b, 3, "concat_channels");
  if (a.shape()[1] != b.shape()[1] || a.shape()[2] != b.shape()[2]) {
    throw DimensionError("concat_channels: spatial sizes differ, " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const int ca = a.shape()[0], cb = b.shape()[0];
  std::vector<S> out;
  out.reserve(a.numel() + b.numel());
  out.insert(out.end(), a.value().begin(), a.value().end());
  out.insert(out.end(), b.value().begin(), b.value().end());
  Node<S>* node =
      a.graph()->make_node({ca + cb, a.shape()[1], a.shape()[2]}, std::move(out),
                           {a.node(), b.node()}, "concat_channels");
  if (node->needs_grad) {
    Node<S>* pa = a.node();
    Node<S>* pb = b.node();
    const std::size_t na = a.numel();
    node->backward = [node, pa, pb, na] {
      if (pa->needs_grad) {
        for (std::size_t i = 0; i < na; ++i) pa->grad[i] += node->grad[i];
      }
      if (pb->needs_grad) {
        for (std::size_t i = 0; i < pb->grad.size(); ++i) {
          pb->grad[i] += node->grad[na + i];
        }
      }
    };
  }
  return a.graph()->wrap(node);
}

template <typename S>
Tensor<S> reshape(Tensor<S> a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) +
                         " as " + shape_str(shape));
  }
  std::vector<S> out(a.value());
  Node<S>* node = a.graph()->make_node(std::move(shape), std::move(out),
                                       {a.node()}, "reshape");
  if (node->needs_grad) {
    Node<S>* pa = a.node();
    node->backward = [node, pa] {
      for (std::size_t i = 0; i < node->grad.size(); ++i) {
        pa->grad[i] += node->grad[i];
      }
    };
  }
  return a.graph()->wrap(node);
}

// ---------------------------------------------------------------------------
// Explicit instantiations
// ---------------------------------------------------------------------------

#define TAGAN_INSTANTIATE_AD(S)                                               \
  template class Graph<S>;                                                    \
  template Tensor<S> add(Tensor<S>, Tensor<S>);                               \
  template Tensor<S> sub(Tensor<S>, Tensor<S>);                               \
  template Tensor<S> mul(Tensor<S>, Tensor<S>);                               \
  template Tensor<S> add_scalar(Tensor<S>, double);                           \
  template Tensor<S> mul_scalar(Tensor<S>, double);                           \
  template Tensor<S> neg(Tensor<S>);                                          \
  template Tensor<S> abs(Tensor<S>);                                          \
  template Tensor<S> exp(Tensor<S>);                                          \
  template Tensor<S> log(Tensor<S>);                                          \
  template Tensor<S> tanh(Tensor<S>);                                         \
  template Tensor<S> sigmoid(Tensor<S>);                                      \
  template Tensor<S> leaky_relu(Tensor<S>, double);                           \
  template Tensor<S> clamp(Tensor<S>, double, double);                        \
  template Tensor<S> sum(Tensor<S>);                                          \
  template Tensor<S> mean(Tensor<S>);                                         \
  template Tensor<S> dot(Tensor<S>, Tensor<S>);                               \
  template Tensor<S> matmul(Tensor<S>, Tensor<S>);                            \
  template Tensor<S> matvec(Tensor<S>, Tensor<S>);                            \
  template Tensor<S> row(Tensor<S>, int);                                     \
  template Tensor<S> slice(Tensor<S>, int, int);                              \
  template Tensor<S> stack_rows(std::span<const Tensor<S>>);                  \
  template Tensor<S> stack_scalars(std::span<const Tensor<S>>);               \
  template Tensor<S> mean_rows(Tensor<S>);                                    \
  template Tensor<S> softmax(Tensor<S>);                                      \
  template Tensor<S> softmax_rows(Tensor<S>);                                 \
  template Tensor<S> conv2d(Tensor<S>, Tensor<S>, int, int);                  \
  template Tensor<S> add_channel_bias(Tensor<S>, Tensor<S>);                  \
  template Tensor<S> global_avg_pool(Tensor<S>);                              \
  template Tensor<S> upsample_nearest2x(Tensor<S>);                           \
  template Tensor<S> tile_spatial(Tensor<S>, int, int);                       \
  template Tensor<S> concat_channels(Tensor<S>, Tensor<S>);                   \
  template Tensor<S> reshape(Tensor<S>, Shape);

TAGAN_INSTANTIATE_AD(float)
TAGAN_INSTANTIATE_AD(double)

#undef TAGAN_INSTANTIATE_AD

}  // namespace tagan::ad
