#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sami/tensor.hpp"

namespace sami {

struct LstmCellParams;

// Reverse-mode automatic differentiation over a define-by-run tape. Values are
// computed eagerly as nodes are appended; append order is the topological
// order, so backward() is a single reverse sweep that visits each node once.
// The tape is rebuilt for every forward pass.
class Tape {
 public:
  using NodeId = std::int32_t;

  struct BackwardStats {
    std::size_t nodes_visited = 0;
  };

  // Leaves. Constants never receive gradients.
  NodeId leaf(Tensor value, bool requires_grad = true);
  NodeId constant(Tensor value) { return leaf(std::move(value), false); }

  // Elementwise and linear algebra ops.
  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double s);
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId relu(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId softplus(NodeId a);
  NodeId clamp(NodeId a, double lo, double hi);
  NodeId minimum(NodeId a, NodeId b);
  // a * s with s a scalar node broadcast over a.
  NodeId mul_scalar(NodeId a, NodeId s);

  // Reductions.
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId l2_norm(NodeId a);
  NodeId row_sum(NodeId a);     // (r,c) -> (r,1)
  NodeId logsumexp(NodeId a);   // vector -> scalar, stable
  NodeId softmax(NodeId a);     // over the last axis, shape preserving

  // Shape plumbing.
  NodeId concat(NodeId a, NodeId b);                            // along the last axis
  NodeId slice(NodeId a, std::size_t begin, std::size_t len);   // along the last axis
  NodeId stack_rows(std::span<const NodeId> rows);              // n vectors -> (n,d)
  NodeId stack_scalars(std::span<const NodeId> scalars);        // n scalars -> (n,)

  // Fused affine layer: x @ w + b with b broadcast across rows.
  NodeId affine(NodeId x, NodeId w, NodeId b);

  // Fused LSTM cell step on a single row. Returns h' and c'.
  struct LstmNodeIds {
    NodeId w_i, w_f, w_o, w_c;
    NodeId b_i, b_f, b_o, b_c;
  };
  struct LstmStepOut {
    NodeId h;
    NodeId c;
  };
  LstmStepOut lstm_step(const LstmNodeIds& p, NodeId x, NodeId h, NodeId c);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  // Valid after backward(); empty tensor if the node never received gradient.
  const Tensor& grad(NodeId id) const { return grads_[id]; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }

  // Root must be scalar. Accumulates gradients for every node that leads to a
  // gradient-requiring leaf.
  BackwardStats backward(NodeId root);

  std::size_t size() const { return nodes_.size(); }
  void reset();

 private:
  enum class Op : std::uint8_t {
    Leaf, Matmul, Add, Sub, Mul, Scale, Tanh, Sigmoid, Relu, Exp, Log,
    Softplus, Clamp, Minimum, MulScalar, Sum, Mean, L2Norm, RowSum, LogSumExp,
    Softmax, Concat, Slice, StackRows, StackScalars, Affine, LstmGates,
  };

  struct Node {
    Op op;
    bool requires_grad;
    std::uint32_t in_begin, in_count;
    double p0 = 0.0, p1 = 0.0;
    Tensor value;
    std::vector<double> aux;
  };

  NodeId push(Op op, Tensor value, std::initializer_list<NodeId> ins, double p0 = 0.0,
              double p1 = 0.0);
  NodeId push(Op op, Tensor value, std::span<const NodeId> ins, double p0 = 0.0,
              double p1 = 0.0);
  std::span<const NodeId> inputs(const Node& n) const {
    return {inputs_pool_.data() + n.in_begin, n.in_count};
  }
  Tensor& grad_buffer(NodeId id);
  void dispatch_backward(NodeId id);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<NodeId> inputs_pool_;
};

}  // namespace sami
