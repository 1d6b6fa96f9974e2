#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string_view>
#include <vector>

#include "fcppn/tensor.hpp"

namespace fcppn {

enum class OpKind {
  leaf,
  add,
  sub,
  mul,
  scale,
  arctan,
  square,
  sigmoid,
  relu,
  conv1x1,
  conv3x3,
  maxpool2x2,
  avgpool2x2,
  concat_channels,
  reduce_mean,
  reduce_sum,
  matmul,
};

std::string_view op_name(OpKind kind);

using NodeId = std::size_t;

// Append-only reverse-mode autodiff tape.
//
// Ops are evaluated eagerly when appended, so shape errors surface at build
// time and value() is immediately usable. After leaves are changed with
// set_leaf(), forward() re-evaluates the non-leaf nodes in id order. Inputs
// always have smaller ids than the node using them, so the graph is acyclic.
//
// Any op producing NaN/Inf throws NonFiniteError naming the node.
//
// A Graph is single-writer; kernels parallelise inside an op only.
template <typename T>
class Graph {
 public:
  NodeId constant(Tensor<T> value);
  NodeId parameter(Tensor<T> value);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, T factor);
  NodeId arctan(NodeId a);
  NodeId square(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId relu(NodeId a);
  // x [H,W,Cin], w [Cin,Cout], b [Cout] -> [H,W,Cout]
  NodeId conv1x1(NodeId x, NodeId w, NodeId b);
  // x [H,W,Cin], w [3,3,Cin,Cout], b [Cout] -> [H,W,Cout]
  NodeId conv3x3(NodeId x, NodeId w, NodeId b);
  NodeId maxpool2x2(NodeId x);
  NodeId avgpool2x2(NodeId x);
  NodeId concat_channels(NodeId a, NodeId b);
  NodeId reduce_mean(NodeId a);
  NodeId reduce_sum(NodeId a);
  // Operands of rank >= 2 are viewed as matrices [numel/last, last].
  NodeId matmul(NodeId a, NodeId b, bool transpose_a = false,
                bool transpose_b = false);

  std::size_t size() const { return nodes_.size(); }
  OpKind kind(NodeId id) const { return node(id).kind; }
  bool is_trainable(NodeId id) const { return node(id).trainable; }
  const Tensor<T>& value(NodeId id) const { return node(id).value; }

  // Replaces a leaf's value. The shape must not change.
  void set_leaf(NodeId id, Tensor<T> value);
  // Direct write access to a leaf's elements.
  std::span<T> leaf_data(NodeId id);

  // Re-evaluates every non-leaf node with id <= `upto`.
  const Tensor<T>& forward(NodeId upto);
  void forward();

  // Populates gradient(leaf) for every trainable leaf. Leaves not reachable
  // from `loss` get zeros. The loss must hold exactly one element.
  void backward(NodeId loss);
  const Tensor<T>& gradient(NodeId id) const;

  std::vector<NodeId> trainable_leaves() const;

 private:
  struct Node {
    OpKind kind = OpKind::leaf;
    std::array<NodeId, 3> inputs{};
    std::size_t arity = 0;
    T factor = T{1};
    bool transpose_a = false;
    bool transpose_b = false;
    bool trainable = false;
    bool needs_grad = false;
    Tensor<T> value;
    std::vector<std::size_t> argmax;
  };

  const Node& node(NodeId id) const;
  NodeId append(Node n);
  void evaluate(Node& n, NodeId id);
  void propagate(NodeId id);

  std::vector<Node> nodes_;
  std::vector<Tensor<T>> grads_;
};

// Convenience wrappers using the names the rest of the toolkit documents.
template <typename T>
const Tensor<T>& forward_eval(Graph<T>& graph, NodeId node) {
  return graph.forward(node);
}

template <typename T>
std::map<NodeId, Tensor<T>> backward_grad(Graph<T>& graph, NodeId loss) {
  graph.backward(loss);
  std::map<NodeId, Tensor<T>> out;
  for (NodeId leaf : graph.trainable_leaves()) {
    out.emplace(leaf, graph.gradient(leaf));
  }
  return out;
}

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace fcppn
