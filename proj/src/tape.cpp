#include "nurobust/tape.hpp"

#include <cmath>

namespace nurobust {

Tape::NodeId Tape::check(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw TapeError("node id out of range");
  return id;
}

Matrix& Tape::grad_buf(NodeId id) {
  Node& n = nodes_[id];
  if (!n.grad_alloc) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad_alloc = true;
  }
  return n.grad;
}

const Matrix& Tape::grad(NodeId id) const {
  const Node& n = nodes_[check(id)];
  if (!n.grad_alloc) throw TapeError("gradient not computed for node");
  return n.grad;
}

Tape::NodeId Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&)> back) {
  if (backward_done_) throw TapeError("tape already differentiated");
  require_finite(value, "tape node");
  nodes_.push_back(Node{std::move(value), {}, std::move(back), requires_grad, false});
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::leaf(Matrix value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  check(a);
  check(b);
  const Matrix& A = nodes_[a].value;
  const Matrix& B = nodes_[b].value;
  if (A.cols() != B.rows()) throw TapeError("matmul dimension mismatch");
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  NodeId out = push(A * B, rg, nullptr);
  if (rg) {
    nodes_[out].back = [a, b, out](Tape& t) {
      const Matrix& g = t.nodes_[out].grad;
      if (t.nodes_[a].requires_grad) t.grad_buf(a).noalias() += g * t.nodes_[b].value.transpose();
      if (t.nodes_[b].requires_grad) t.grad_buf(b).noalias() += t.nodes_[a].value.transpose() * g;
    };
  }
  return out;
}

Tape::NodeId Tape::add_row_broadcast(NodeId a, NodeId row) {
  check(a);
  check(row);
  const Matrix& A = nodes_[a].value;
  const Matrix& R = nodes_[row].value;
  if (R.rows() != 1 || R.cols() != A.cols()) throw TapeError("row broadcast shape mismatch");
  bool rg = nodes_[a].requires_grad || nodes_[row].requires_grad;
  Matrix v = A.rowwise() + R.row(0);
  NodeId out = push(std::move(v), rg, nullptr);
  if (rg) {
    nodes_[out].back = [a, row, out](Tape& t) {
      const Matrix& g = t.nodes_[out].grad;
      if (t.nodes_[a].requires_grad) t.grad_buf(a) += g;
      if (t.nodes_[row].requires_grad) t.grad_buf(row).row(0) += g.colwise().sum();
    };
  }
  return out;
}

namespace {
void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw TapeError(std::string(op) + ": shape mismatch");
}
}  // namespace

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  check(a);
  check(b);
  require_same_shape(nodes_[a].value, nodes_[b].value, "add");
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  NodeId out = push(nodes_[a].value + nodes_[b].value, rg, nullptr);
  if (rg) {
    nodes_[out].back = [a, b, out](Tape& t) {
      const Matrix& g = t.nodes_[out].grad;
      if (t.nodes_[a].requires_grad) t.grad_buf(a) += g;
      if (t.nodes_[b].requires_grad) t.grad_buf(b) += g;
    };
  }
  return out;
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  check(a);
  check(b);
  require_same_shape(nodes_[a].value, nodes_[b].value, "sub");
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  NodeId out = push(nodes_[a].value - nodes_[b].value, rg, nullptr);
  if (rg) {
    nodes_[out].back = [a, b, out](Tape& t) {
      const Matrix& g = t.nodes_[out].grad;
      if (t.nodes_[a].requires_grad) t.grad_buf(a) += g;
      if (t.nodes_[b].requires_grad) t.grad_buf(b) -= g;
    };
  }
  return out;
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  check(a);
  check(b);
  require_same_shape(nodes_[a].value, nodes_[b].value, "mul");
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  NodeId out = push(nodes_[a].value.cwiseProduct(nodes_[b].value), rg, nullptr);
  if (rg) {
    nodes_[out].back = [a, b, out](Tape& t) {
      const Matrix& g = t.nodes_[out].grad;
      if (t.nodes_[a].requires_grad) t.grad_buf(a) += g.cwiseProduct(t.nodes_[b].value);
      if (t.nodes_[b].requires_grad) t.grad_buf(b) += g.cwiseProduct(t.nodes_[a].value);
    };
  }
  return out;
}

Tape::NodeId Tape::div(NodeId a, NodeId b) {
  check(a);
  check(b);
  require_same_shape(nodes_[a].value, nodes_[b].value, "div");
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  NodeId out = push(nodes_[a].value.cwiseQuotient(nodes_[b].value), rg, nullptr);
  if (rg) {
    nodes_[out].back = [a, b, out](Tape& t) {
      const Matrix& g = t.nodes_[out].grad;
      const Matrix& B = t.nodes_[b].value;
      if (t.nodes_[a].requires_grad) t.grad_buf(a) += g.cwiseQuotient(B);
      if (t.nodes_[b].requires_grad)
        t.grad_buf(b) -= g.cwiseProduct(t.nodes_[out].value).cwiseQuotient(B);
    };
  }
  return out;
}

Tape::NodeId Tape::scale(NodeId a, double s) {
  check(a);
  bool rg = nodes_[a].requires_grad;
  NodeId out = push(nodes_[a].value * s, rg, nullptr);
  if (rg) {
    nodes_[out].back = [a, out, s](Tape& t) { t.grad_buf(a) += t.nodes_[out].grad * s; };
  }
  return out;
}

Tape::NodeId Tape::offset(NodeId a, double s) {
  check(a);
  bool rg = nodes_[a].requires_grad;
  NodeId out = push((nodes_[a].value.array() + s).matrix(), rg, nullptr);
  if (rg) {
    nodes_[out].back = [a, out](Tape& t) { t.grad_buf(a) += t.nodes_[out].grad; };
  }
  return out;
}

Tape::NodeId Tape::elu(NodeId a) {
  check(a);
  const Matrix& A = nodes_[a].value;
  Matrix v = A.unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
  bool rg = nodes_[a].requires_grad;
  NodeId out = push(std::move(v), rg, nullptr);
  if (rg) {
    nodes_[out].back = [a, out](Tape& t) {
      const Matrix& A2 = t.nodes_[a].value;
      const Matrix& V = t.nodes_[out].value;
      const Matrix& g = t.nodes_[out].grad;
      // d elu/dx = 1 for x > 0, elu(x) + 1 otherwise
      Matrix& ga = t.grad_buf(a);
      for (Eigen::Index i = 0; i < A2.size(); ++i) {
        double d = A2.data()[i] > 0.0 ? 1.0 : V.data()[i] + 1.0;
        ga.data()[i] += g.data()[i] * d;
      }
    };
  }
  return out;
}

Tape::NodeId Tape::sigmoid_clamped(NodeId a) {
  check(a);
  const Matrix& A = nodes_[a].value;
  Matrix v = A.unaryExpr([](double x) {
    double s = 1.0 / (1.0 + std::exp(-x));
    if (s < kSigmoidClamp) s = kSigmoidClamp;
    if (s > 1.0 - kSigmoidClamp) s = 1.0 - kSigmoidClamp;
    return s;
  });
  bool rg = nodes_[a].requires_grad;
  NodeId out = push(std::move(v), rg, nullptr);
  if (rg) {
    nodes_[out].back = [a, out](Tape& t) {
      const Matrix& V = t.nodes_[out].value;
      const Matrix& g = t.nodes_[out].grad;
      Matrix& ga = t.grad_buf(a);
      for (Eigen::Index i = 0; i < V.size(); ++i) {
        double s = V.data()[i];
        // zero slope inside the clamped region
        double d = (s <= kSigmoidClamp || s >= 1.0 - kSigmoidClamp) ? 0.0 : s * (1.0 - s);
        ga.data()[i] += g.data()[i] * d;
      }
    };
  }
  return out;
}

Tape::NodeId Tape::log_elem(NodeId a) {
  check(a);
  bool rg = nodes_[a].requires_grad;
  NodeId out = push(nodes_[a].value.array().log().matrix(), rg, nullptr);
  if (rg) {
    nodes_[out].back = [a, out](Tape& t) {
      t.grad_buf(a) += t.nodes_[out].grad.cwiseQuotient(t.nodes_[a].value);
    };
  }
  return out;
}

Tape::NodeId Tape::relu(NodeId a) {
  check(a);
  bool rg = nodes_[a].requires_grad;
  NodeId out = push(nodes_[a].value.cwiseMax(0.0), rg, nullptr);
  if (rg) {
    nodes_[out].back = [a, out](Tape& t) {
      const Matrix& A = t.nodes_[a].value;
      const Matrix& g = t.nodes_[out].grad;
      Matrix& ga = t.grad_buf(a);
      for (Eigen::Index i = 0; i < A.size(); ++i)
        if (A.data()[i] > 0.0) ga.data()[i] += g.data()[i];
    };
  }
  return out;
}

Tape::NodeId Tape::mean_all(NodeId a) {
  check(a);
  bool rg = nodes_[a].requires_grad;
  Matrix v(1, 1);
  v(0, 0) = nodes_[a].value.mean();
  NodeId out = push(std::move(v), rg, nullptr);
  if (rg) {
    nodes_[out].back = [a, out](Tape& t) {
      double g = t.nodes_[out].grad(0, 0) / static_cast<double>(t.nodes_[a].value.size());
      t.grad_buf(a).array() += g;
    };
  }
  return out;
}

Tape::NodeId Tape::sum_all(NodeId a) {
  check(a);
  bool rg = nodes_[a].requires_grad;
  Matrix v(1, 1);
  v(0, 0) = nodes_[a].value.sum();
  NodeId out = push(std::move(v), rg, nullptr);
  if (rg) {
    nodes_[out].back = [a, out](Tape& t) {
      t.grad_buf(a).array() += t.nodes_[out].grad(0, 0);
    };
  }
  return out;
}

Tape::NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw TapeError("concat_cols: empty");
  Eigen::Index rows = nodes_[check(parts[0])].value.rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (NodeId p : parts) {
    check(p);
    if (nodes_[p].value.rows() != rows) throw TapeError("concat_cols: row mismatch");
    cols += nodes_[p].value.cols();
    rg = rg || nodes_[p].requires_grad;
  }
  Matrix v(rows, cols);
  Eigen::Index off = 0;
  for (NodeId p : parts) {
    v.middleCols(off, nodes_[p].value.cols()) = nodes_[p].value;
    off += nodes_[p].value.cols();
  }
  NodeId out = push(std::move(v), rg, nullptr);
  if (rg) {
    std::vector<NodeId> ps = parts;
    nodes_[out].back = [ps, out](Tape& t) {
      const Matrix& g = t.nodes_[out].grad;
      Eigen::Index o = 0;
      for (NodeId p : ps) {
        Eigen::Index c = t.nodes_[p].value.cols();
        if (t.nodes_[p].requires_grad) t.grad_buf(p) += g.middleCols(o, c);
        o += c;
      }
    };
  }
  return out;
}

Tape::NodeId Tape::grad_scale(NodeId a, double s) {
  check(a);
  bool rg = nodes_[a].requires_grad;
  NodeId out = push(nodes_[a].value, rg, nullptr);
  if (rg) {
    nodes_[out].back = [a, out, s](Tape& t) { t.grad_buf(a) += t.nodes_[out].grad * s; };
  }
  return out;
}

void Tape::backward(NodeId loss) {
  check(loss);
  if (backward_done_) throw TapeError("tape already differentiated");
  const Matrix& lv = nodes_[loss].value;
  if (lv.rows() != 1 || lv.cols() != 1) throw TapeError("loss node must be scalar");
  require_finite(lv, "loss");
  backward_done_ = true;
  grad_buf(loss)(0, 0) = 1.0;
  for (NodeId i = loss; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.grad_alloc) n.back(*this);
  }
}

}  // namespace nurobust
