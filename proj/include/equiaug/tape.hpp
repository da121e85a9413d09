#pragma once

#include <vector>

#include "equiaug/types.hpp"

namespace equiaug::diff {

using NodeId = int;

/// Reverse-mode tape over matrix-valued nodes.
///
/// The primitive set is fixed: add, mul (elementwise), matmul, tanh, exp,
/// log, square, relu (max with zero) and mean (over all entries). Everything
/// else in the project is composed from these. `add` and `mul` broadcast a
/// 1xC row or a 1x1 scalar operand across the other operand's rows.
///
/// Nodes are created in topological order by construction (an input id is
/// always smaller than the id of the node consuming it), so the backward
/// pass is a single reverse sweep.
class Tape {
 public:
  NodeId constant(Matrix value);
  NodeId constant(scalar_t value);  // 1x1

  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId matmul(NodeId a, NodeId b);
  NodeId tanh(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId square(NodeId a);
  NodeId relu(NodeId a);
  NodeId mean(NodeId a);

  /// Seeds the (1x1) loss node with adjoint 1 and accumulates adjoints by
  /// the chain rule. Throws NumericalError if any adjoint is non-finite.
  void backward(NodeId loss);

  const Matrix& value(NodeId id) const { return nodes_[check(id)].value; }
  const Matrix& adjoint(NodeId id) const { return nodes_[check(id)].adjoint; }
  scalar_t value_scalar(NodeId id) const;

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  enum class Op { leaf, add, mul, matmul, tanh, exp, log, square, relu, mean };

  struct Node {
    Op op;
    NodeId a = -1;
    NodeId b = -1;
    Matrix value;
    Matrix adjoint;
  };

  NodeId push(Op op, NodeId a, NodeId b, Matrix value);
  int check(NodeId id) const;
  void accumulate(NodeId target, const Matrix& grad);

  std::vector<Node> nodes_;
};

// Composite helpers (sugar over the primitive set).

NodeId scale(Tape& t, NodeId a, scalar_t c);
NodeId neg(Tape& t, NodeId a);
NodeId sub(Tape& t, NodeId a, NodeId b);
NodeId add_scalar(Tape& t, NodeId a, scalar_t c);
NodeId sum(Tape& t, NodeId a);

/// Mean over rows of the summed squared per-column error:
/// mse(P, T) = (1/rows) * sum((P - T).^2).
NodeId mse(Tape& t, NodeId pred, NodeId target);

/// Row sums as a column vector (matmul with a ones column).
NodeId row_sums(Tape& t, NodeId a);

/// Numeric twin of the taped mse, same reduction convention.
scalar_t mse_value(const Matrix& pred, const Matrix& target);

}  // namespace equiaug::diff
