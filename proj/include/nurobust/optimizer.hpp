#pragma once

#include "nurobust/matrix.hpp"

#include <vector>

namespace nurobust {

enum class OptKind { kSgd, kAdam };
enum class Direction { kMinimize, kMaximize };

// First-order optimizer over a fixed set of parameter matrices. Maximize
// direction negates the incoming gradient before the standard update, so one
// maximize step on L equals one minimize step on -L bitwise.
class Optimizer {
 public:
  Optimizer(OptKind kind, double lr, Direction dir = Direction::kMinimize);

  void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads);

  double learning_rate() const { return lr_; }
  Direction direction() const { return dir_; }

 private:
  OptKind kind_;
  double lr_;
  Direction dir_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace nurobust
