#pragma once

#include "nurobust/matrix.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nurobust {

// Bounded linear class: f_theta(x) = theta^T x with ||theta||_2 <= B and
// ||x||_2 <= X on the evaluated sample.
struct LinearClassSpec {
  double norm_bound_b = 1.0;  // B
  double norm_bound_x = 1.0;  // X
  int dim = 5;
};

struct BoundReport {
  double estimate = 0.0;       // empirical weighted Rademacher complexity
  double bound = 0.0;          // (B X / N) sqrt(sum w^2)
  double std_error = 0.0;      // MC standard error of the estimate (0 if exhaustive)
  long sigma_draws = 0;
  bool exhaustive = false;
};

// (B/N) E_sigma || sum_n sigma_n w_n x_n ||_2, the closed-form inner sup for
// the linear class. Exhaustive sigma enumeration for N <= 12, MC otherwise.
BoundReport weighted_rademacher_linear(const LinearClassSpec& spec, const Matrix& x,
                                       const Vector& w, long sigma_draws, std::uint64_t seed);

// Sample analogue of the Thm-4.2 bound.
double linear_bound_thm42(const LinearClassSpec& spec, const Vector& w);

// Coverage experiment for the high-probability excess-risk bound: over
// `trials` resampled datasets of size n, the fraction of trials where
// sup_theta [L - Lhat] exceeds 2*R_mu + (c'/2) sqrt(log(1/delta)/n).
struct GapExperimentConfig {
  int n = 200;
  int trials = 500;
  double delta = 0.05;
  int theta_grid = 200;
  int dim = 5;
  double norm_bound_b = 1.0;
  std::uint64_t seed = 0;
  long population_n = 200000;   // sample for the population risk L
  long rademacher_outer = 200;  // (D, sigma) draws for the population complexity
  bool unit_weights = false;    // w == 1 reduces to the classical bound
};

struct CoverageReport {
  int trials = 0;
  int violations = 0;
  double violation_fraction = 0.0;
  double bound = 0.0;           // the full right-hand side
  double rademacher = 0.0;      // MC population weighted Rademacher estimate
  double concentration = 0.0;   // (c'/2) sqrt(log(1/delta)/n)
  double c_prime = 0.0;         // computed instance-loss bound
  double max_gap = 0.0;         // largest sup-gap observed
};

CoverageReport generalization_gap_experiment(const GapExperimentConfig& cfg);

void write_bound_report_csv(const std::vector<BoundReport>& reports, const std::string& path);

}  // namespace nurobust
