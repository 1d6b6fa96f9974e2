#include "fcppn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "fcppn/kernels.hpp"

namespace fcppn {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::arctan: return "arctan";
    case OpKind::square: return "square";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::relu: return "relu";
    case OpKind::conv1x1: return "conv1x1";
    case OpKind::conv3x3: return "conv3x3-same";
    case OpKind::maxpool2x2: return "maxpool2x2";
    case OpKind::avgpool2x2: return "avgpool2x2";
    case OpKind::concat_channels: return "concat-channels";
    case OpKind::reduce_mean: return "reduce-mean";
    case OpKind::reduce_sum: return "reduce-sum";
    case OpKind::matmul: return "matmul";
  }
  return "unknown";
}

namespace {

using Index = long;

struct MatrixView {
  std::size_t rows;
  std::size_t cols;
};

MatrixView as_matrix(const Shape& s, std::string_view op) {
  if (s.size() < 2) {
    throw ShapeError(std::string(op) + ": operand must have rank >= 2, got " +
                     to_string(s));
  }
  return {numel(s) / s.back(), s.back()};
}

void require_same_shape(const Shape& a, const Shape& b, std::string_view op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) +
                     " vs " + to_string(b));
  }
}

void require_rank3(const Shape& s, std::string_view op) {
  if (s.size() != 3) {
    throw ShapeError(std::string(op) + ": expected [H,W,C], got " +
                     to_string(s));
  }
}

template <typename T, typename F>
void map_into(const Tensor<T>& in, Tensor<T>& out, F f) {
  const auto n = static_cast<Index>(in.size());
  const T* src = in.data();
  T* dst = out.data();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) dst[i] = f(src[i]);
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
void ensure_shape(Tensor<T>& t, const Shape& shape) {
  // A default tensor has rank 0 but no storage, so compare sizes too.
  if (t.shape() != shape || t.size() != numel(shape)) t = Tensor<T>(shape);
}

}  // namespace

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(NodeId id) const {
  if (id >= nodes_.size()) {
    throw Error("graph node " + std::to_string(id) + " does not exist");
  }
  return nodes_[id];
}

template <typename T>
NodeId Graph<T>::append(Node n) {
  const NodeId id = nodes_.size();
  for (std::size_t i = 0; i < n.arity; ++i) {
    const Node& in = node(n.inputs[i]);
    n.needs_grad = n.needs_grad || in.needs_grad;
  }
  evaluate(n, id);
  nodes_.push_back(std::move(n));
  return id;
}

template <typename T>
NodeId Graph<T>::constant(Tensor<T> value) {
  if (!value.all_finite()) {
    throw NonFiniteError(nodes_.size(), "constant leaf " +
                                            std::to_string(nodes_.size()) +
                                            " holds non-finite values");
  }
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

template <typename T>
NodeId Graph<T>::parameter(Tensor<T> value) {
  const NodeId id = constant(std::move(value));
  nodes_[id].trainable = true;
  nodes_[id].needs_grad = true;
  return id;
}

#define FCPPN_UNARY(name, op)                   \
  template <typename T>                         \
  NodeId Graph<T>::name(NodeId a) {             \
    Node n;                                     \
    n.kind = OpKind::op;                        \
    n.inputs = {a, 0, 0};                       \
    n.arity = 1;                                \
    return append(std::move(n));                \
  }
#define FCPPN_BINARY(name, op)                  \
  template <typename T>                         \
  NodeId Graph<T>::name(NodeId a, NodeId b) {   \
    Node n;                                     \
    n.kind = OpKind::op;                        \
    n.inputs = {a, b, 0};                       \
    n.arity = 2;                                \
    return append(std::move(n));                \
  }

FCPPN_BINARY(add, add)
FCPPN_BINARY(sub, sub)
FCPPN_BINARY(mul, mul)
FCPPN_BINARY(concat_channels, concat_channels)
FCPPN_UNARY(arctan, arctan)
FCPPN_UNARY(square, square)
FCPPN_UNARY(sigmoid, sigmoid)
FCPPN_UNARY(relu, relu)
FCPPN_UNARY(maxpool2x2, maxpool2x2)
FCPPN_UNARY(avgpool2x2, avgpool2x2)
FCPPN_UNARY(reduce_mean, reduce_mean)
FCPPN_UNARY(reduce_sum, reduce_sum)

#undef FCPPN_UNARY
#undef FCPPN_BINARY

template <typename T>
NodeId Graph<T>::scale(NodeId a, T factor) {
  Node n;
  n.kind = OpKind::scale;
  n.inputs = {a, 0, 0};
  n.arity = 1;
  n.factor = factor;
  return append(std::move(n));
}

template <typename T>
NodeId Graph<T>::conv1x1(NodeId x, NodeId w, NodeId b) {
  Node n;
  n.kind = OpKind::conv1x1;
  n.inputs = {x, w, b};
  n.arity = 3;
  return append(std::move(n));
}

template <typename T>
NodeId Graph<T>::conv3x3(NodeId x, NodeId w, NodeId b) {
  Node n;
  n.kind = OpKind::conv3x3;
  n.inputs = {x, w, b};
  n.arity = 3;
  return append(std::move(n));
}

template <typename T>
NodeId Graph<T>::matmul(NodeId a, NodeId b, bool transpose_a,
                        bool transpose_b) {
  Node n;
  n.kind = OpKind::matmul;
  n.inputs = {a, b, 0};
  n.arity = 2;
  n.transpose_a = transpose_a;
  n.transpose_b = transpose_b;
  return append(std::move(n));
}

template <typename T>
void Graph<T>::evaluate(Node& n, NodeId id) {
  const auto in = [&](std::size_t i) -> const Tensor<T>& {
    return nodes_[n.inputs[i]].value;
  };
  const std::string_view name = op_name(n.kind);

  switch (n.kind) {
    case OpKind::leaf:
      return;
    case OpKind::add:
    case OpKind::sub:
    case OpKind::mul: {
      const Tensor<T>& a = in(0);
      const Tensor<T>& b = in(1);
      require_same_shape(a.shape(), b.shape(), name);
      ensure_shape(n.value, a.shape());
      const auto cnt = static_cast<Index>(a.size());
      const T* pa = a.data();
      const T* pb = b.data();
      T* out = n.value.data();
      if (n.kind == OpKind::add) {
#pragma omp parallel for schedule(static)
        for (Index i = 0; i < cnt; ++i) out[i] = pa[i] + pb[i];
      } else if (n.kind == OpKind::sub) {
#pragma omp parallel for schedule(static)
        for (Index i = 0; i < cnt; ++i) out[i] = pa[i] - pb[i];
      } else {
#pragma omp parallel for schedule(static)
        for (Index i = 0; i < cnt; ++i) out[i] = pa[i] * pb[i];
      }
      break;
    }
    case OpKind::scale: {
      ensure_shape(n.value, in(0).shape());
      const T f = n.factor;
      map_into(in(0), n.value, [f](T v) { return v * f; });
      break;
    }
    case OpKind::arctan:
      ensure_shape(n.value, in(0).shape());
      map_into(in(0), n.value, [](T v) { return std::atan(v); });
      break;
    case OpKind::square:
      ensure_shape(n.value, in(0).shape());
      map_into(in(0), n.value, [](T v) { return v * v; });
      break;
    case OpKind::sigmoid:
      ensure_shape(n.value, in(0).shape());
      map_into(in(0), n.value, [](T v) { return stable_sigmoid(v); });
      break;
    case OpKind::relu:
      ensure_shape(n.value, in(0).shape());
      map_into(in(0), n.value, [](T v) { return v > T{0} ? v : T{0}; });
      break;
    case OpKind::conv1x1:
    case OpKind::conv3x3: {
      const Tensor<T>& x = in(0);
      const Tensor<T>& w = in(1);
      const Tensor<T>& b = in(2);
      require_rank3(x.shape(), name);
      const bool is3 = n.kind == OpKind::conv3x3;
      const std::size_t cin = x.dim(2);
      const bool w_ok = is3 ? (w.rank() == 4 && w.dim(0) == 3 &&
                               w.dim(1) == 3 && w.dim(2) == cin)
                            : (w.rank() == 2 && w.dim(0) == cin);
      if (!w_ok) {
        throw ShapeError(std::string(name) + ": weights " +
                         to_string(w.shape()) + " incompatible with input " +
                         to_string(x.shape()));
      }
      const std::size_t cout = w.shape().back();
      if (b.shape() != Shape{cout}) {
        throw ShapeError(std::string(name) + ": bias " + to_string(b.shape()) +
                         " expected [" + std::to_string(cout) + "]");
      }
      const kernels::ConvDims d{x.dim(0), x.dim(1), cin, cout};
      ensure_shape(n.value, Shape{d.height, d.width, cout});
      if (is3) {
        kernels::conv3x3_forward(x.data(), w.data(), b.data(), n.value.data(),
                                 d);
      } else {
        kernels::conv1x1_forward(x.data(), w.data(), b.data(), n.value.data(),
                                 d);
      }
      break;
    }
    case OpKind::maxpool2x2:
    case OpKind::avgpool2x2: {
      const Tensor<T>& x = in(0);
      require_rank3(x.shape(), name);
      const kernels::PoolDims d{x.dim(0), x.dim(1), x.dim(2)};
      if (d.height == 0 || d.width == 0) {
        throw ShapeError(std::string(name) + ": empty input");
      }
      ensure_shape(n.value, Shape{d.out_height(), d.out_width(), d.channels});
      if (n.kind == OpKind::maxpool2x2) {
        n.argmax.resize(n.value.size());
        kernels::maxpool2x2_forward(x.data(), n.value.data(), n.argmax.data(),
                                    d);
      } else {
        kernels::avgpool2x2_forward(x.data(), n.value.data(), d);
      }
      break;
    }
    case OpKind::concat_channels: {
      const Tensor<T>& a = in(0);
      const Tensor<T>& b = in(1);
      require_rank3(a.shape(), name);
      require_rank3(b.shape(), name);
      if (a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1)) {
        throw ShapeError("concat-channels: spatial mismatch " +
                         to_string(a.shape()) + " vs " + to_string(b.shape()));
      }
      const std::size_t ca = a.dim(2);
      const std::size_t cb = b.dim(2);
      ensure_shape(n.value, Shape{a.dim(0), a.dim(1), ca + cb});
      const auto pixels = static_cast<Index>(a.dim(0) * a.dim(1));
      const T* pa = a.data();
      const T* pb = b.data();
      T* out = n.value.data();
#pragma omp parallel for schedule(static)
      for (Index p = 0; p < pixels; ++p) {
        std::copy(pa + p * ca, pa + (p + 1) * ca, out + p * (ca + cb));
        std::copy(pb + p * cb, pb + (p + 1) * cb, out + p * (ca + cb) + ca);
      }
      break;
    }
    case OpKind::reduce_mean:
    case OpKind::reduce_sum: {
      const Tensor<T>& a = in(0);
      if (a.size() == 0) throw ShapeError(std::string(name) + ": empty input");
      // Serial and in index order, so the result never depends on threads.
      T acc = 0;
      for (const T v : a.values()) acc += v;
      if (n.kind == OpKind::reduce_mean) acc /= static_cast<T>(a.size());
      ensure_shape(n.value, Shape{});
      n.value[0] = acc;
      break;
    }
    case OpKind::matmul: {
      const MatrixView a = as_matrix(in(0).shape(), name);
      const MatrixView b = as_matrix(in(1).shape(), name);
      const std::size_t m = n.transpose_a ? a.cols : a.rows;
      const std::size_t k = n.transpose_a ? a.rows : a.cols;
      const std::size_t kb = n.transpose_b ? b.cols : b.rows;
      const std::size_t cols = n.transpose_b ? b.rows : b.cols;
      if (k != kb) {
        throw ShapeError("matmul: inner dimensions differ (" +
                         std::to_string(k) + " vs " + std::to_string(kb) + ")");
      }
      ensure_shape(n.value, Shape{m, cols});
      n.value.fill(T{0});
      kernels::matmul_accumulate(in(0).data(), in(1).data(), n.value.data(), m,
                                 k, cols, n.transpose_a, n.transpose_b);
      break;
    }
  }

  if (!n.value.all_finite()) {
    throw NonFiniteError(id, "non-finite value produced by node " +
                                 std::to_string(id) + " (" +
                                 std::string(name) + ")");
  }
}

template <typename T>
void Graph<T>::set_leaf(NodeId id, Tensor<T> value) {
  Node& n = nodes_.at(id);
  if (n.kind != OpKind::leaf) {
    throw Error("set_leaf: node " + std::to_string(id) + " is not a leaf");
  }
  require_same_shape(n.value.shape(), value.shape(), "set_leaf");
  n.value = std::move(value);
}

template <typename T>
std::span<T> Graph<T>::leaf_data(NodeId id) {
  Node& n = nodes_.at(id);
  if (n.kind != OpKind::leaf) {
    throw Error("leaf_data: node " + std::to_string(id) + " is not a leaf");
  }
  return n.value.values();
}

template <typename T>
const Tensor<T>& Graph<T>::forward(NodeId upto) {
  node(upto);
  for (NodeId id = 0; id <= upto; ++id) {
    Node& n = nodes_[id];
    if (n.kind == OpKind::leaf) {
      if (!n.value.all_finite()) {
        throw NonFiniteError(id, "leaf " + std::to_string(id) +
                                     " holds non-finite values");
      }
      continue;
    }
    evaluate(n, id);
  }
  return nodes_[upto].value;
}

template <typename T>
void Graph<T>::forward() {
  if (!nodes_.empty()) forward(nodes_.size() - 1);
}

template <typename T>
std::vector<NodeId> Graph<T>::trainable_leaves() const {
  std::vector<NodeId> out;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].trainable) out.push_back(id);
  }
  return out;
}

template <typename T>
const Tensor<T>& Graph<T>::gradient(NodeId id) const {
  node(id);
  if (id >= grads_.size() || grads_[id].shape() != nodes_[id].value.shape() ||
      !nodes_[id].needs_grad) {
    throw Error("no gradient recorded for node " + std::to_string(id));
  }
  return grads_[id];
}

template <typename T>
void Graph<T>::backward(NodeId loss) {
  const Node& ln = node(loss);
  if (ln.value.size() != 1) {
    throw ShapeError("backward: loss node " + std::to_string(loss) +
                     " is not scalar, shape " + to_string(ln.value.shape()));
  }
  if (trainable_leaves().empty()) {
    throw Error("backward: graph has no trainable leaf");
  }
  grads_.resize(nodes_.size());
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (!nodes_[id].needs_grad) continue;
    ensure_shape(grads_[id], nodes_[id].value.shape());
    grads_[id].fill(T{0});
  }
  if (!ln.needs_grad) return;
  grads_[loss][0] = T{1};
  for (NodeId id = loss + 1; id-- > 0;) {
    if (nodes_[id].needs_grad && nodes_[id].kind != OpKind::leaf) {
      propagate(id);
    }
  }
}

template <typename T>
void Graph<T>::propagate(NodeId id) {
  const Node& n = nodes_[id];
  const Tensor<T>& g = grads_[id];
  const auto wants = [&](std::size_t i) {
    return nodes_[n.inputs[i]].needs_grad;
  };
  const auto gin = [&](std::size_t i) -> Tensor<T>& {
    return grads_[n.inputs[i]];
  };
  const auto in = [&](std::size_t i) -> const Tensor<T>& {
    return nodes_[n.inputs[i]].value;
  };
  const auto count = static_cast<Index>(g.size());
  const T* pg = g.data();

  switch (n.kind) {
    case OpKind::leaf:
      return;
    case OpKind::add:
    case OpKind::sub: {
      const T sign = n.kind == OpKind::add ? T{1} : T{-1};
      if (wants(0)) {
        T* d = gin(0).data();
#pragma omp parallel for schedule(static)
        for (Index i = 0; i < count; ++i) d[i] += pg[i];
      }
      if (wants(1)) {
        T* d = gin(1).data();
#pragma omp parallel for schedule(static)
        for (Index i = 0; i < count; ++i) d[i] += sign * pg[i];
      }
      return;
    }
    case OpKind::mul: {
      for (std::size_t k = 0; k < 2; ++k) {
        if (!wants(k)) continue;
        T* d = gin(k).data();
        const T* other = in(1 - k).data();
#pragma omp parallel for schedule(static)
        for (Index i = 0; i < count; ++i) d[i] += pg[i] * other[i];
      }
      return;
    }
    case OpKind::scale:
    case OpKind::arctan:
    case OpKind::square:
    case OpKind::sigmoid:
    case OpKind::relu: {
      if (!wants(0)) return;
      T* d = gin(0).data();
      const T* x = in(0).data();
      const T* y = n.value.data();
      const T f = n.factor;
      const OpKind kind = n.kind;
#pragma omp parallel for schedule(static)
      for (Index i = 0; i < count; ++i) {
        T local;
        switch (kind) {
          case OpKind::scale: local = f; break;
          case OpKind::arctan: local = T{1} / (T{1} + x[i] * x[i]); break;
          case OpKind::square: local = T{2} * x[i]; break;
          case OpKind::sigmoid: local = y[i] * (T{1} - y[i]); break;
          default: local = x[i] > T{0} ? T{1} : T{0}; break;
        }
        d[i] += pg[i] * local;
      }
      return;
    }
    case OpKind::conv1x1:
    case OpKind::conv3x3: {
      const Tensor<T>& x = in(0);
      const Tensor<T>& w = in(1);
      const kernels::ConvDims d{x.dim(0), x.dim(1), x.dim(2),
                                w.shape().back()};
      const bool is3 = n.kind == OpKind::conv3x3;
      if (wants(0)) {
        if (is3) {
          kernels::conv3x3_backward_input(pg, w.data(), gin(0).data(), d);
        } else {
          kernels::conv1x1_backward_input(pg, w.data(), gin(0).data(), d);
        }
      }
      if (wants(1) || wants(2)) {
        // The kernel fills both; route unwanted halves to scratch.
        Tensor<T> scratch_w, scratch_b;
        T* dw = wants(1) ? gin(1).data()
                         : (scratch_w = Tensor<T>(w.shape())).data();
        T* db = wants(2) ? gin(2).data()
                         : (scratch_b = Tensor<T>(in(2).shape())).data();
        if (is3) {
          kernels::conv3x3_backward_params(x.data(), pg, dw, db, d);
        } else {
          kernels::conv1x1_backward_params(x.data(), pg, dw, db, d);
        }
      }
      return;
    }
    case OpKind::maxpool2x2:
    case OpKind::avgpool2x2: {
      if (!wants(0)) return;
      const Tensor<T>& x = in(0);
      const kernels::PoolDims d{x.dim(0), x.dim(1), x.dim(2)};
      if (n.kind == OpKind::maxpool2x2) {
        kernels::maxpool2x2_backward(pg, n.argmax.data(), gin(0).data(), d);
      } else {
        kernels::avgpool2x2_backward(pg, gin(0).data(), d);
      }
      return;
    }
    case OpKind::concat_channels: {
      const std::size_t ca = in(0).dim(2);
      const std::size_t cb = in(1).dim(2);
      const auto pixels = static_cast<Index>(in(0).dim(0) * in(0).dim(1));
      T* da = wants(0) ? gin(0).data() : nullptr;
      T* db = wants(1) ? gin(1).data() : nullptr;
#pragma omp parallel for schedule(static)
      for (Index p = 0; p < pixels; ++p) {
        const T* row = pg + p * (ca + cb);
        if (da) {
          for (std::size_t c = 0; c < ca; ++c) da[p * ca + c] += row[c];
        }
        if (db) {
          for (std::size_t c = 0; c < cb; ++c) db[p * cb + c] += row[ca + c];
        }
      }
      return;
    }
    case OpKind::reduce_mean:
    case OpKind::reduce_sum: {
      if (!wants(0)) return;
      Tensor<T>& d = gin(0);
      T v = g[0];
      if (n.kind == OpKind::reduce_mean) v /= static_cast<T>(d.size());
      const auto cnt = static_cast<Index>(d.size());
      T* pd = d.data();
#pragma omp parallel for schedule(static)
      for (Index i = 0; i < cnt; ++i) pd[i] += v;
      return;
    }
    case OpKind::matmul: {
      const MatrixView a = as_matrix(in(0).shape(), "matmul");
      const MatrixView b = as_matrix(in(1).shape(), "matmul");
      const bool ta = n.transpose_a;
      const bool tb = n.transpose_b;
      const std::size_t m = ta ? a.cols : a.rows;
      const std::size_t k = ta ? a.rows : a.cols;
      const std::size_t cols = tb ? b.rows : b.cols;
      const T* pa = in(0).data();
      const T* pb = in(1).data();
      if (wants(0)) {
        if (ta) {
          // dA[K,M] += op(B)[K,N] * dC^T
          kernels::matmul_accumulate(pb, pg, gin(0).data(), k, cols, m, tb,
                                     true);
        } else {
          // dA[M,K] += dC * op(B)^T
          kernels::matmul_accumulate(pg, pb, gin(0).data(), m, cols, k, false,
                                     !tb);
        }
      }
      if (wants(1)) {
        if (tb) {
          // dB[N,K] += dC^T * op(A)
          kernels::matmul_accumulate(pg, pa, gin(1).data(), cols, m, k, true,
                                     ta);
        } else {
          // dB[K,N] += op(A)^T * dC
          kernels::matmul_accumulate(pa, pg, gin(1).data(), k, m, cols, !ta,
                                     false);
        }
      }
      return;
    }
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace fcppn
