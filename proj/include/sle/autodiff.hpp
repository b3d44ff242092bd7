#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sle/dense_array.hpp"
#include "sle/errors.hpp"
#include "sle/kernels.hpp"

namespace sle {

/// Handle to a node of a Graph. Only meaningful for the graph that made it.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
  bool valid() const noexcept { return id != std::numeric_limits<std::size_t>::max(); }
};

enum class OpKind {
  leaf,
  constant,
  affine,
  silu,
  add,
  sub,
  scale,
  gather_rows,
  rms_normalize,
  stop_gradient,
  mean_abs_error,
  cosine_loss,
  sum,
  mean,
};

/// Append-only tape for reverse-mode differentiation. Values are computed
/// eagerly when a node is created; backward() walks the tape once in reverse
/// creation order, which is a reverse topological order because a node can
/// only reference nodes created before it.
template <typename T>
class Graph {
 public:
  using Array = BasicArray<T>;
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  Var leaf(Array value) { return push(OpKind::leaf, std::move(value), {}, true, nullptr); }
  Var constant(Array value) { return push(OpKind::constant, std::move(value), {}, false, nullptr); }

  const Array& value(Var v) const { return node(v).value; }
  OpKind kind(Var v) const { return node(v).kind; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t backward_visits() const noexcept { return visits_; }

  /// Gradient of the last backward() root with respect to v.
  const Array& grad(Var v) const {
    const Node& n = node(v);
    if (!n.requires_grad) throw ContractError("node does not carry a gradient");
    if (!backward_done_) throw ContractError("grad() called before backward()");
    return n.grad;
  }

  void backward(Var root) {
    const Node& r = node(root);
    if (r.value.size() != 1) throw ContractError("backward root must be scalar, got shape " + shape_string(r.value.shape()));
    if (backward_done_) throw ContractError("backward() already ran on this graph");
    for (Node& n : nodes_)
      if (n.requires_grad) n.grad = Array(n.value.shape(), T{0});
    backward_done_ = true;
    if (!r.requires_grad) return;
    nodes_[root.id].grad[0] = T{1};
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.backward) continue;
      ++visits_;
      n.backward(*this, i);
    }
  }

  // Used by operations.
  Var push(OpKind kind, Array value, std::vector<std::size_t> inputs, bool requires_grad, BackwardFn fn) {
    for (std::size_t in : inputs)
      if (in >= nodes_.size()) throw ContractError("graph input refers to a future node");
    nodes_.push_back(Node{kind, std::move(inputs), std::move(value), Array{}, requires_grad, std::move(fn)});
    return Var{nodes_.size() - 1};
  }
  const Array& value_at(std::size_t id) const { return nodes_[id].value; }
  const Array& grad_at(std::size_t id) const { return nodes_[id].grad; }
  bool wants_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of an input, or nullptr when that input takes no gradient.
  T* grad_target(std::size_t id) { return nodes_[id].requires_grad ? nodes_[id].grad.data() : nullptr; }
  std::size_t input(std::size_t id, std::size_t k) const { return nodes_[id].inputs[k]; }

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    Array value;
    Array grad;
    bool requires_grad;
    BackwardFn backward;
  };

  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw ContractError("variable does not belong to this graph");
    return nodes_[v.id];
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
  std::size_t visits_ = 0;
};

namespace ops {

namespace detail {

template <typename T>
bool any_grad(const Graph<T>& g, std::initializer_list<Var> vars) {
  for (Var v : vars)
    if (g.requires_grad(v)) return true;
  return false;
}

template <typename T>
void require_nonempty(const BasicArray<T>& a, const char* what) {
  if (a.empty()) throw ShapeError(std::string(what) + ": empty input");
}

}  // namespace detail

/// x [rows, in] (or [in]) times w [in, out], plus optional bias [out].
template <typename T>
Var affine(Graph<T>& g, Var x, Var w, Var b = Var{}) {
  const auto& xv = g.value(x);
  const auto& wv = g.value(w);
  if (wv.rank() != 2) throw ShapeError("affine: weight must be rank 2, got " + shape_string(wv.shape()));
  const std::size_t in = wv.shape()[0], out = wv.shape()[1];
  detail::require_nonempty(xv, "affine");
  if (xv.cols() != in || xv.rank() > 2)
    throw ShapeError("affine: input " + shape_string(xv.shape()) + " vs weight " + shape_string(wv.shape()));
  const bool has_bias = b.valid();
  if (has_bias && g.value(b).shape() != Shape{out})
    throw ShapeError("affine: bias " + shape_string(g.value(b).shape()) + " vs out " + std::to_string(out));
  const std::size_t rows = xv.rows();
  BasicArray<T> y(xv.rank() == 1 ? Shape{out} : Shape{rows, out});
  kernels::affine_forward(xv.data(), rows, in, wv.data(), out, has_bias ? g.value(b).data() : nullptr, y.data());
  std::vector<std::size_t> inputs{x.id, w.id};
  if (has_bias) inputs.push_back(b.id);
  const bool rg = detail::any_grad(g, {x, w}) || (has_bias && g.requires_grad(b));
  return g.push(OpKind::affine, std::move(y), std::move(inputs), rg, [rows, in, out, has_bias](Graph<T>& gg, std::size_t self) {
    const std::size_t xi = gg.input(self, 0), wi = gg.input(self, 1);
    kernels::affine_backward(gg.value_at(xi).data(), rows, in, gg.value_at(wi).data(), out, gg.grad_at(self).data(),
                             gg.grad_target(xi), gg.grad_target(wi), has_bias ? gg.grad_target(gg.input(self, 2)) : nullptr);
  });
}

template <typename T>
Var silu(Graph<T>& g, Var x) {
  const auto& xv = g.value(x);
  BasicArray<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = kernels::silu(xv[i]);
  return g.push(OpKind::silu, std::move(y), {x.id}, g.requires_grad(x), [](Graph<T>& gg, std::size_t self) {
    const std::size_t xi = gg.input(self, 0);
    const auto& xv = gg.value_at(xi);
    const auto& gy = gg.grad_at(self);
    T* gx = gg.grad_target(xi);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += gy[i] * kernels::silu_derivative(xv[i]);
  });
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  require_same_shape(g.value(a).shape(), g.value(b).shape(), "add");
  BasicArray<T> y = g.value(a);
  const auto& bv = g.value(b);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return g.push(OpKind::add, std::move(y), {a.id, b.id}, detail::any_grad(g, {a, b}), [](Graph<T>& gg, std::size_t self) {
    const auto& gy = gg.grad_at(self);
    for (std::size_t k = 0; k < 2; ++k)
      if (T* gi = gg.grad_target(gg.input(self, k)))
        for (std::size_t i = 0; i < gy.size(); ++i) gi[i] += gy[i];
  });
}

template <typename T>
Var sub(Graph<T>& g, Var a, Var b) {
  require_same_shape(g.value(a).shape(), g.value(b).shape(), "sub");
  BasicArray<T> y = g.value(a);
  const auto& bv = g.value(b);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  return g.push(OpKind::sub, std::move(y), {a.id, b.id}, detail::any_grad(g, {a, b}), [](Graph<T>& gg, std::size_t self) {
    const auto& gy = gg.grad_at(self);
    if (T* ga = gg.grad_target(gg.input(self, 0)))
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    if (T* gb = gg.grad_target(gg.input(self, 1)))
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
  });
}

template <typename T>
Var scale(Graph<T>& g, Var x, T factor) {
  BasicArray<T> y = g.value(x);
  for (auto& v : y.values()) v *= factor;
  return g.push(OpKind::scale, std::move(y), {x.id}, g.requires_grad(x), [factor](Graph<T>& gg, std::size_t self) {
    const auto& gy = gg.grad_at(self);
    T* gx = gg.grad_target(gg.input(self, 0));
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += factor * gy[i];
  });
}

/// Row lookup: out[r,:] = table[index[r],:]. Gradients scatter-add back.
template <typename T>
Var gather_rows(Graph<T>& g, Var table, std::vector<std::size_t> index) {
  const auto& tv = g.value(table);
  if (tv.rank() != 2) throw ShapeError("gather_rows: table must be rank 2");
  const std::size_t width = tv.shape()[1];
  BasicArray<T> y(Shape{index.size(), width});
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= tv.shape()[0]) throw ContractError("gather_rows: row index " + std::to_string(index[r]) + " out of range");
    auto src = tv.row(index[r]);
    std::copy(src.begin(), src.end(), y.row(r).begin());
  }
  return g.push(OpKind::gather_rows, std::move(y), {table.id}, g.requires_grad(table),
                [index = std::move(index), width](Graph<T>& gg, std::size_t self) {
                  const auto& gy = gg.grad_at(self);
                  T* gt = gg.grad_target(gg.input(self, 0));
                  for (std::size_t r = 0; r < index.size(); ++r)
                    for (std::size_t c = 0; c < width; ++c) gt[index[r] * width + c] += gy[r * width + c];
                });
}

/// Row-wise RMS normalization without gain: y = x / sqrt(mean(x^2) + eps).
template <typename T>
Var rms_normalize(Graph<T>& g, Var x, T eps) {
  const auto& xv = g.value(x);
  detail::require_nonempty(xv, "rms_normalize");
  if (!(eps >= T{0})) throw ContractError("rms_normalize: eps must be non-negative");
  const std::size_t rows = xv.rows(), cols = xv.cols();
  BasicArray<T> y(xv.shape());
  std::vector<T> inv(rows);
  if (!kernels::rms_normalize_rows(xv.data(), rows, cols, eps, y.data(), inv.data()))
    throw DegenerateInputError("rms_normalize: zero row with eps = 0");
  return g.push(OpKind::rms_normalize, std::move(y), {x.id}, g.requires_grad(x),
                [rows, cols, inv = std::move(inv)](Graph<T>& gg, std::size_t self) {
                  const std::size_t xi = gg.input(self, 0);
                  const auto& xv = gg.value_at(xi);
                  const auto& gy = gg.grad_at(self);
                  T* gx = gg.grad_target(xi);
                  for (std::size_t r = 0; r < rows; ++r) {
                    const T* xr = xv.data() + r * cols;
                    const T* gr = gy.data() + r * cols;
                    double proj = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) proj += static_cast<double>(gr[c]) * xr[c];
                    const double s = inv[r];
                    const T k = static_cast<T>(s * s * s * proj / static_cast<double>(cols));
                    for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += static_cast<T>(s) * gr[c] - k * xr[c];
                  }
                });
}

/// Identity in the forward pass; contributes nothing to upstream gradients.
template <typename T>
Var stop_gradient(Graph<T>& g, Var x) {
  return g.push(OpKind::stop_gradient, g.value(x), {x.id}, false, nullptr);
}

/// mean_i |a_i - b_i| over every element. The subgradient at a_i == b_i is 0.
template <typename T>
Var mean_abs_error(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  require_same_shape(av.shape(), bv.shape(), "mean_abs_error");
  detail::require_nonempty(av, "mean_abs_error");
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(static_cast<double>(av[i]) - static_cast<double>(bv[i]));
  const double n = static_cast<double>(av.size());
  return g.push(OpKind::mean_abs_error, BasicArray<T>::scalar(static_cast<T>(acc / n)), {a.id, b.id},
                detail::any_grad(g, {a, b}), [n](Graph<T>& gg, std::size_t self) {
                  const std::size_t ai = gg.input(self, 0), bi = gg.input(self, 1);
                  const auto& av = gg.value_at(ai);
                  const auto& bv = gg.value_at(bi);
                  const T up = static_cast<T>(gg.grad_at(self)[0] / n);
                  T* ga = gg.grad_target(ai);
                  T* gb = gg.grad_target(bi);
                  for (std::size_t i = 0; i < av.size(); ++i) {
                    const T d = av[i] - bv[i];
                    const T s = d > T{0} ? up : (d < T{0} ? -up : T{0});
                    if (ga) ga[i] += s;
                    if (gb) gb[i] -= s;
                  }
                });
}

/// Mean over rows of 1 - cos(a_r, b_r). Rank-1 inputs are one row.
template <typename T>
Var cosine_loss(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  require_same_shape(av.shape(), bv.shape(), "cosine_loss");
  detail::require_nonempty(av, "cosine_loss");
  const std::size_t rows = av.rows(), cols = av.cols();
  std::vector<double> na(rows), nb(rows), cs(rows);
  double acc = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    na[r] = std::sqrt(kernels::dot(av.row(r), av.row(r)));
    nb[r] = std::sqrt(kernels::dot(bv.row(r), bv.row(r)));
    if (na[r] == 0.0 || nb[r] == 0.0) throw DegenerateInputError("cosine_loss: zero vector in row " + std::to_string(r));
    cs[r] = kernels::dot(av.row(r), bv.row(r)) / (na[r] * nb[r]);
    acc += 1.0 - cs[r];
  }
  return g.push(OpKind::cosine_loss, BasicArray<T>::scalar(static_cast<T>(acc / static_cast<double>(rows))), {a.id, b.id},
                detail::any_grad(g, {a, b}),
                [rows, cols, na = std::move(na), nb = std::move(nb), cs = std::move(cs)](Graph<T>& gg, std::size_t self) {
                  const std::size_t ai = gg.input(self, 0), bi = gg.input(self, 1);
                  const auto& av = gg.value_at(ai);
                  const auto& bv = gg.value_at(bi);
                  const double up = static_cast<double>(gg.grad_at(self)[0]) / static_cast<double>(rows);
                  T* ga = gg.grad_target(ai);
                  T* gb = gg.grad_target(bi);
                  for (std::size_t r = 0; r < rows; ++r) {
                    const double inv = 1.0 / (na[r] * nb[r]);
                    const double ka = cs[r] / (na[r] * na[r]);
                    const double kb = cs[r] / (nb[r] * nb[r]);
                    for (std::size_t c = 0; c < cols; ++c) {
                      const std::size_t i = r * cols + c;
                      if (ga) ga[i] -= static_cast<T>(up * (bv[i] * inv - av[i] * ka));
                      if (gb) gb[i] -= static_cast<T>(up * (av[i] * inv - bv[i] * kb));
                    }
                  }
                });
}

template <typename T>
Var sum(Graph<T>& g, Var x) {
  const auto& xv = g.value(x);
  double acc = 0.0;
  for (T v : xv.values()) acc += v;
  return g.push(OpKind::sum, BasicArray<T>::scalar(static_cast<T>(acc)), {x.id}, g.requires_grad(x),
                [](Graph<T>& gg, std::size_t self) {
                  const std::size_t xi = gg.input(self, 0);
                  const T up = gg.grad_at(self)[0];
                  T* gx = gg.grad_target(xi);
                  for (std::size_t i = 0; i < gg.value_at(xi).size(); ++i) gx[i] += up;
                });
}

template <typename T>
Var mean(Graph<T>& g, Var x) {
  const auto& xv = g.value(x);
  detail::require_nonempty(xv, "mean");
  double acc = 0.0;
  for (T v : xv.values()) acc += v;
  const double n = static_cast<double>(xv.size());
  return g.push(OpKind::mean, BasicArray<T>::scalar(static_cast<T>(acc / n)), {x.id}, g.requires_grad(x),
                [n](Graph<T>& gg, std::size_t self) {
                  const std::size_t xi = gg.input(self, 0);
                  const T up = static_cast<T>(gg.grad_at(self)[0] / n);
                  T* gx = gg.grad_target(xi);
                  for (std::size_t i = 0; i < gg.value_at(xi).size(); ++i) gx[i] += up;
                });
}

}  // namespace ops

/// Plain row-wise RMS normalization, no graph.
template <typename T>
BasicArray<T> rms_normalize(const BasicArray<T>& x, T eps) {
  if (x.empty()) throw ShapeError("rms_normalize: empty input");
  if (!(eps >= T{0})) throw ContractError("rms_normalize: eps must be non-negative");
  BasicArray<T> y(x.shape());
  if (!kernels::rms_normalize_rows(x.data(), x.rows(), x.cols(), eps, y.data(), static_cast<T*>(nullptr)))
    throw DegenerateInputError("rms_normalize: zero row with eps = 0");
  return y;
}

}  // namespace sle
