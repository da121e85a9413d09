#include "equiaug/tape.hpp"

#include <cmath>

namespace equiaug::diff {

namespace {

bool broadcastable(const Matrix& a, const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return true;
  if (b.rows() == 1 && b.cols() == 1) return true;
  if (b.rows() == 1 && b.cols() == a.cols() && a.rows() >= 1) return true;
  return false;
}

// Expand b to a's shape under the row/scalar broadcast rules.
Matrix broadcast_to(const Matrix& b, index_t rows, index_t cols) {
  if (b.rows() == rows && b.cols() == cols) return b;
  if (b.rows() == 1 && b.cols() == 1) return Matrix::Constant(rows, cols, b(0, 0));
  return b.replicate(rows, 1);
}

// Reduce an upstream gradient back to the broadcast operand's shape.
Matrix reduce_to(const Matrix& grad, index_t rows, index_t cols) {
  if (grad.rows() == rows && grad.cols() == cols) return grad;
  if (rows == 1 && cols == 1) return Matrix::Constant(1, 1, grad.sum());
  return grad.colwise().sum();
}

}  // namespace

NodeId Tape::push(Op op, NodeId a, NodeId b, Matrix value) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

int Tape::check(NodeId id) const {
  require(id >= 0 && id < static_cast<NodeId>(nodes_.size()), "tape: node id out of range");
  return id;
}

NodeId Tape::constant(Matrix value) { return push(Op::leaf, -1, -1, std::move(value)); }

NodeId Tape::constant(scalar_t value) { return constant(Matrix::Constant(1, 1, value)); }

NodeId Tape::add(NodeId a, NodeId b) {
  const Matrix& va = nodes_[check(a)].value;
  const Matrix& vb = nodes_[check(b)].value;
  if (!broadcastable(va, vb)) {
    require(broadcastable(vb, va), "tape add: incompatible shapes");
    return add(b, a);
  }
  return push(Op::add, a, b, va + broadcast_to(vb, va.rows(), va.cols()));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Matrix& va = nodes_[check(a)].value;
  const Matrix& vb = nodes_[check(b)].value;
  if (!broadcastable(va, vb)) {
    require(broadcastable(vb, va), "tape mul: incompatible shapes");
    return mul(b, a);
  }
  return push(Op::mul, a, b,
              va.cwiseProduct(broadcast_to(vb, va.rows(), va.cols())));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Matrix& va = nodes_[check(a)].value;
  const Matrix& vb = nodes_[check(b)].value;
  require(va.cols() == vb.rows(), "tape matmul: inner dimensions disagree");
  return push(Op::matmul, a, b, va * vb);
}

NodeId Tape::tanh(NodeId a) {
  return push(Op::tanh, check(a), -1, nodes_[a].value.array().tanh().matrix());
}

NodeId Tape::exp(NodeId a) {
  return push(Op::exp, check(a), -1, nodes_[a].value.array().exp().matrix());
}

NodeId Tape::log(NodeId a) {
  return push(Op::log, check(a), -1, nodes_[a].value.array().log().matrix());
}

NodeId Tape::square(NodeId a) {
  return push(Op::square, check(a), -1, nodes_[a].value.array().square().matrix());
}

NodeId Tape::relu(NodeId a) {
  return push(Op::relu, check(a), -1, nodes_[a].value.cwiseMax(0.0));
}

NodeId Tape::mean(NodeId a) {
  return push(Op::mean, check(a), -1, Matrix::Constant(1, 1, nodes_[a].value.mean()));
}

scalar_t Tape::value_scalar(NodeId id) const {
  const Matrix& v = value(id);
  require(v.size() == 1, "tape: node is not scalar");
  return v(0, 0);
}

void Tape::accumulate(NodeId target, const Matrix& grad) {
  Matrix& adj = nodes_[target].adjoint;
  adj += reduce_to(grad, adj.rows(), adj.cols());
}

void Tape::backward(NodeId loss) {
  check(loss);
  require(nodes_[loss].value.size() == 1, "backward: loss node must be scalar");
  for (Node& n : nodes_) n.adjoint = Matrix::Zero(n.value.rows(), n.value.cols());
  nodes_[loss].adjoint(0, 0) = 1.0;

  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.adjoint.isZero(0.0)) continue;
    const Matrix& up = n.adjoint;
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::add: {
        accumulate(n.a, up);
        accumulate(n.b, up);
        break;
      }
      case Op::mul: {
        const Matrix& va = nodes_[n.a].value;
        const Matrix& vb = nodes_[n.b].value;
        accumulate(n.a, up.cwiseProduct(broadcast_to(vb, va.rows(), va.cols())));
        accumulate(n.b, up.cwiseProduct(va));
        break;
      }
      case Op::matmul: {
        accumulate(n.a, up * nodes_[n.b].value.transpose());
        accumulate(n.b, nodes_[n.a].value.transpose() * up);
        break;
      }
      case Op::tanh: {
        accumulate(n.a, up.cwiseProduct((1.0 - n.value.array().square()).matrix()));
        break;
      }
      case Op::exp: {
        accumulate(n.a, up.cwiseProduct(n.value));
        break;
      }
      case Op::log: {
        accumulate(n.a, up.cwiseQuotient(nodes_[n.a].value));
        break;
      }
      case Op::square: {
        accumulate(n.a, 2.0 * up.cwiseProduct(nodes_[n.a].value));
        break;
      }
      case Op::relu: {
        const Matrix mask = (nodes_[n.a].value.array() > 0.0).cast<scalar_t>().matrix();
        accumulate(n.a, up.cwiseProduct(mask));
        break;
      }
      case Op::mean: {
        const Node& src = nodes_[n.a];
        const scalar_t w = up(0, 0) / static_cast<scalar_t>(src.value.size());
        accumulate(n.a, Matrix::Constant(src.value.rows(), src.value.cols(), w));
        break;
      }
    }
  }

  for (const Node& n : nodes_) {
    if (!n.adjoint.allFinite()) throw NumericalError("backward: non-finite adjoint");
  }
}

NodeId scale(Tape& t, NodeId a, scalar_t c) { return t.mul(a, t.constant(c)); }

NodeId neg(Tape& t, NodeId a) { return scale(t, a, -1.0); }

NodeId sub(Tape& t, NodeId a, NodeId b) { return t.add(a, neg(t, b)); }

NodeId add_scalar(Tape& t, NodeId a, scalar_t c) { return t.add(a, t.constant(c)); }

NodeId sum(Tape& t, NodeId a) {
  const auto n = static_cast<scalar_t>(t.value(a).size());
  return scale(t, t.mean(a), n);
}

NodeId mse(Tape& t, NodeId pred, NodeId target) {
  const Matrix& p = t.value(pred);
  const Matrix& q = t.value(target);
  require(p.rows() == q.rows() && p.cols() == q.cols(), "mse: shape mismatch");
  require(p.rows() > 0 && p.cols() > 0, "mse: empty batch");
  NodeId sq = t.square(sub(t, pred, target));
  return scale(t, t.mean(sq), static_cast<scalar_t>(p.cols()));
}

NodeId row_sums(Tape& t, NodeId a) {
  const Matrix& v = t.value(a);
  return t.matmul(a, t.constant(Matrix::Ones(v.cols(), 1)));
}

scalar_t mse_value(const Matrix& pred, const Matrix& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(),
          "mse: shape mismatch");
  require(pred.size() > 0, "mse: empty batch");
  return (pred - target).array().square().sum() / static_cast<scalar_t>(pred.rows());
}

}  // namespace equiaug::diff
