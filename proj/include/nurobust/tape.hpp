#pragma once

#include "nurobust/matrix.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace nurobust {

// Sigmoid outputs are clamped into [kSigmoidClamp, 1 - kSigmoidClamp] before
// they ever reach a log or a reciprocal, so weights and evidence stay bounded.
inline constexpr double kSigmoidClamp = 1e-6;

struct TapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reverse-mode autodiff over dense matrices. Nodes are appended in
// construction order, which is a valid topological order by construction;
// the backward pass walks them in reverse exactly once.
class Tape {
 public:
  using NodeId = std::int32_t;

  NodeId leaf(Matrix value, bool requires_grad = false);

  NodeId matmul(NodeId a, NodeId b);
  // Adds a 1 x cols row vector to every row of `a`.
  NodeId add_row_broadcast(NodeId a, NodeId row);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId div(NodeId a, NodeId b);  // elementwise
  NodeId scale(NodeId a, double s);
  NodeId offset(NodeId a, double s);
  NodeId elu(NodeId a);  // alpha = 1
  NodeId sigmoid_clamped(NodeId a);
  NodeId log_elem(NodeId a);
  NodeId relu(NodeId a);
  NodeId mean_all(NodeId a);  // 1x1
  NodeId sum_all(NodeId a);   // 1x1
  NodeId concat_cols(const std::vector<NodeId>& parts);
  // Value passthrough whose backward multiplies the upstream gradient by s.
  // s = -1 is a gradient reversal layer.
  NodeId grad_scale(NodeId a, double s);

  const Matrix& value(NodeId id) const { return nodes_[check(id)].value; }
  const Matrix& grad(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_[check(id)].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // `loss` must be a 1x1 node. A tape can be differentiated only once.
  void backward(NodeId loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&)> back;
    bool requires_grad = false;
    bool grad_alloc = false;
  };

  NodeId push(Matrix value, bool requires_grad, std::function<void(Tape&)> back);
  NodeId check(NodeId id) const;
  Matrix& grad_buf(NodeId id);  // zero-initialized on first touch

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace nurobust
