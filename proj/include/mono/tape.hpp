#pragma once

#include <string>
#include <vector>

#include "mono/tensor.hpp"

namespace mono {

// Primitive operations recorded on a Tape.
enum class Op {
  Leaf,
  Matmul,
  Add,
  Mul,
  Sub,
  Scale,
  Softplus,
  Sigmoid,
  Tanh,
  Relu,
  Exp,
  Log,
  SoftmaxLastDim,
  LayerNormLastDim,
  Sum,
  Mean,
  GatherRows,
  Concat,
  Transpose,
};

const char* op_name(Op op);

// Handle to a node on a Tape. Plain index; cheap to copy.
struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Dynamic computation record for reverse-mode differentiation.
//
// Forward calls append nodes in evaluation order, so the node list is already
// topologically sorted; backward() visits it once, in reverse. A Tape owns
// copies of every value that passes through it and shares no mutable state
// with anything else, so distinct tapes can live on distinct threads. A single
// tape is strictly single-threaded.
//
// Elementwise add/sub/mul accept either two identical shapes or a 2-d left
// operand with a 1-d right operand of matching row width (the vector is
// broadcast across rows, the usual bias pattern).
class Tape {
 public:
  // Leaf respecting t.requires_grad. The tensor is copied in.
  Var leaf(Tensor t);
  // Leaf that never requires gradients (masks, fixed matrices, ...).
  Var constant(Tensor t);
  Var constant_scalar(double x);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double alpha);
  Var softplus(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var softmax_lastdim(Var a);
  // Row-wise (x - mean) / sqrt(var + eps) with eps = 1e-5, no affine part.
  Var layernorm_lastdim(Var a);
  Var sum(Var a);
  Var mean(Var a);
  Var gather_rows(Var m, const std::vector<size_t>& row_ids);
  // Concatenate along the last dimension (2-d: same row count; 1-d: append).
  Var concat(Var a, Var b);
  Var transpose(Var a);

  // Dispatch by operation name for the attribute-free primitives
  // ("matmul", "add", ..., "sum", "mean", "concat", "transpose").
  Var apply(const std::string& op_id, const std::vector<Var>& inputs);

  const Tensor& value(Var v) const;

  // Reverse sweep from a scalar output. Gradients accumulate additively
  // across fan-out; leaves not on the path keep zero gradient. Deterministic:
  // repeat runs produce bit-identical results.
  void backward(Var scalar_output);

  // Gradient of the last backward() output w.r.t. node v (zeros if v was not
  // on any gradient path). Shape matches value(v).
  Tensor grad(Var v) const;

  size_t size() const { return nodes_.size(); }

  static constexpr double kLayerNormEps = 1e-5;

 private:
  struct Node {
    Op op = Op::Leaf;
    int32_t a = -1;
    int32_t b = -1;
    Tensor t;                     // output value
    double alpha = 0.0;           // Scale factor
    std::vector<size_t> row_ids;  // GatherRows indices
    bool needs_grad = false;
    std::vector<double> bar;      // adjoint, filled by backward()
  };

  Var push(Node n);
  const Node& node(Var v) const;
  bool needs(Var v) const { return node(v).needs_grad; }

  Var binary_elementwise(Op op, Var a, Var b);
  Var unary(Op op, Var a);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace mono
