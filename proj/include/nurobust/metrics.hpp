#pragma once

#include "nurobust/dataset.hpp"
#include "nurobust/estimators.hpp"

namespace nurobust {

struct PeheValue {
  double mse = 0.0;
  double rmse = 0.0;
  int n_eval = 0;
};

PeheValue pehe(const Vector& tau_hat, const Vector& tau_true);

// MSE of tau_hat against the IPW-transformed outcome built from a known true
// propensity; equals PEHE plus an irreducible noise constant.
double mse_transformed_target(const Vector& tau_hat, const Dataset& ds, const Vector& mu_true);
double mse_transformed_target(const Vector& tau_hat, const Dataset& ds, double mu_constant);

}  // namespace nurobust
