#include "nurobust/optimizer.hpp"

#include <cmath>

namespace nurobust {

Optimizer::Optimizer(OptKind kind, double lr, Direction dir) : kind_(kind), lr_(lr), dir_(dir) {
  if (!(lr > 0.0) && lr != 0.0) throw std::invalid_argument("learning rate must be nonnegative");
}

void Optimizer::step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("optimizer: parameter/gradient count mismatch");
  if (kind_ == OptKind::kAdam && m_.empty()) {
    for (const Matrix* p : params) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (kind_ == OptKind::kAdam) ++t_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    if (grads[i]->rows() != p.rows() || grads[i]->cols() != p.cols())
      throw std::invalid_argument("optimizer: gradient shape mismatch");
    require_finite(*grads[i], "gradient");
    Matrix g = (dir_ == Direction::kMaximize) ? Matrix(-*grads[i]) : *grads[i];
    if (kind_ == OptKind::kSgd) {
      p -= lr_ * g;
    } else {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
      double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
      double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
      Matrix mhat = m_[i] / bc1;
      Matrix vhat = v_[i] / bc2;
      p -= lr_ * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + eps_).matrix());
    }
  }
}

}  // namespace nurobust
