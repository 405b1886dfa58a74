#include "nurobust/metrics.hpp"

#include <cmath>

namespace nurobust {

PeheValue pehe(const Vector& tau_hat, const Vector& tau_true) {
  if (tau_hat.size() != tau_true.size() || tau_hat.size() == 0)
    throw std::invalid_argument("pehe: length mismatch or empty");
  PeheValue out;
  out.n_eval = static_cast<int>(tau_hat.size());
  out.mse = (tau_hat - tau_true).squaredNorm() / static_cast<double>(tau_hat.size());
  out.rmse = std::sqrt(out.mse);
  return out;
}

double mse_transformed_target(const Vector& tau_hat, const Dataset& ds, const Vector& mu_true) {
  if (tau_hat.size() != ds.n()) throw std::invalid_argument("mse_transformed_target: length mismatch");
  Vector zeros = Vector::Zero(ds.n());
  Vector z = transformed_outcome(ds, zeros, zeros, mu_true, TransformKind::kIpw);
  return (tau_hat - z).squaredNorm() / static_cast<double>(ds.n());
}

double mse_transformed_target(const Vector& tau_hat, const Dataset& ds, double mu_constant) {
  if (!(mu_constant > 0.0 && mu_constant < 1.0))
    throw std::invalid_argument("mse_transformed_target: propensity must be in (0,1)");
  return mse_transformed_target(tau_hat, ds, Vector::Constant(ds.n(), mu_constant));
}

}  // namespace nurobust
