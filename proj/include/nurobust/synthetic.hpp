#pragma once

#include "nurobust/dataset.hpp"
#include "nurobust/matrix.hpp"

#include <cstdint>

namespace nurobust {

enum class NoiseKind { kAdditive, kMultiplicative };

std::string to_string(NoiseKind k);
NoiseKind noise_from_string(const std::string& s);

// Decomposed-covariate benchmark: d_c confounders, d_o outcome-only and d_t
// effect-only covariates, remaining dimensions inert.
struct SyntheticConfig {
  int d_c = 5;
  int d_o = 5;
  int d_t = 5;
  int d = 25;
  double selection_strength = 3.0;  // xi_sel
  NoiseKind noise = NoiseKind::kAdditive;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SurfaceRow {
  double ey0 = 0.0;
  double ey1 = 0.0;
  double tau = 0.0;
  double mu0 = 0.0;
};

struct SyntheticSample {
  Dataset ds;         // oracle columns populated
  Vector ey0;         // noiseless surfaces per row
  Vector ey1;
  double omega = 0.0;     // calibrated propensity offset
  double mn_scale = 0.0;  // multiplicative-noise sd (0 in the AN setting)
};

Matrix sample_covariates(const SyntheticConfig& cfg, int n);

// Sample median of sum(x_c^2)/d_c, so the median propensity is sigmoid(0).
double calibrate_omega(const SyntheticConfig& cfg, const Matrix& x);

SurfaceRow true_surfaces(const SyntheticConfig& cfg, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                         double omega);

SyntheticSample sample_dataset(const SyntheticConfig& cfg, int n);

}  // namespace nurobust
