#include "nurobust/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace nurobust {

std::string to_string(NoiseKind k) {
  return k == NoiseKind::kAdditive ? "AN" : "MN";
}

NoiseKind noise_from_string(const std::string& s) {
  if (s == "AN" || s == "an" || s == "additive") return NoiseKind::kAdditive;
  if (s == "MN" || s == "mn" || s == "multiplicative") return NoiseKind::kMultiplicative;
  throw std::invalid_argument("unknown noise kind: " + s);
}

void SyntheticConfig::validate() const {
  if (d_c < 1 || d_o < 0 || d_t < 0) throw std::invalid_argument("synthetic: bad block dims");
  if (d < d_c + d_o + d_t) throw std::invalid_argument("synthetic: d < d_c + d_o + d_t");
  if (!(selection_strength > 0.0)) throw std::invalid_argument("synthetic: xi_sel must be > 0");
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Matrix sample_covariates_with(const SyntheticConfig& cfg, int n, Rng& rng) {
  return gaussian_matrix(n, cfg.d, rng);
}

double confounder_score(const SyntheticConfig& cfg, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  return x.head(cfg.d_c).array().square().sum() / static_cast<double>(cfg.d_c);
}

}  // namespace

Matrix sample_covariates(const SyntheticConfig& cfg, int n) {
  cfg.validate();
  if (n < 1) throw std::invalid_argument("sample_covariates: n must be >= 1");
  Rng rng(cfg.seed);
  return sample_covariates_with(cfg, n, rng);
}

double calibrate_omega(const SyntheticConfig& cfg, const Matrix& x) {
  cfg.validate();
  if (x.rows() == 0) throw std::invalid_argument("calibrate_omega: empty sample");
  std::vector<double> scores(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) scores[static_cast<std::size_t>(i)] = confounder_score(cfg, x.row(i));
  std::sort(scores.begin(), scores.end());
  std::size_t n = scores.size();
  if (n % 2 == 1) return scores[n / 2];
  return 0.5 * (scores[n / 2 - 1] + scores[n / 2]);
}

SurfaceRow true_surfaces(const SyntheticConfig& cfg, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                         double omega) {
  cfg.validate();
  if (x.size() != cfg.d) throw std::invalid_argument("true_surfaces: dimension mismatch");
  SurfaceRow s;
  s.ey0 = x.head(cfg.d_c + cfg.d_o).array().square().sum();
  s.tau = x.segment(cfg.d_c + cfg.d_o, cfg.d_t).array().square().sum();
  s.ey1 = s.ey0 + s.tau;
  s.mu0 = sigmoid(cfg.selection_strength * (confounder_score(cfg, x) - omega));
  return s;
}

SyntheticSample sample_dataset(const SyntheticConfig& cfg, int n) {
  cfg.validate();
  if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
  Rng rng(cfg.seed);
  Matrix x = sample_covariates_with(cfg, n, rng);
  double omega = calibrate_omega(cfg, x);

  SyntheticSample out;
  out.omega = omega;
  out.ey0.resize(n);
  out.ey1.resize(n);
  Vector tau(n), mu(n);
  for (int i = 0; i < n; ++i) {
    SurfaceRow s = true_surfaces(cfg, x.row(i), omega);
    out.ey0[i] = s.ey0;
    out.ey1[i] = s.ey1;
    tau[i] = s.tau;
    mu[i] = s.mu0;
  }

  // Multiplicative noise scale matched to the additive setting's sd of 1:
  // xi' = 2 / (sqrt(Var E[Y1|x]) + sqrt(Var E[Y0|x])), from sample variances.
  double mn_scale = 0.0;
  if (cfg.noise == NoiseKind::kMultiplicative) {
    auto variance = [n](const Vector& v) {
      double mean = v.mean();
      return (v.array() - mean).square().sum() / static_cast<double>(n);
    };
    double v0 = variance(out.ey0);
    double v1 = variance(out.ey1);
    if (v0 <= 0.0 || v1 <= 0.0)
      throw std::invalid_argument("sample_dataset: degenerate outcome surfaces");
    mn_scale = 2.0 / (std::sqrt(v1) + std::sqrt(v0));
  }
  out.mn_scale = mn_scale;

  Vector a(n), y(n), y0(n), y1(n);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    a[i] = unif(rng) < mu[i] ? 1.0 : 0.0;
    double e0 = gauss(rng);
    double e1 = gauss(rng);
    if (cfg.noise == NoiseKind::kAdditive) {
      y0[i] = out.ey0[i] + e0;
      y1[i] = out.ey1[i] + e1;
    } else {
      y0[i] = out.ey0[i] * (1.0 + mn_scale * e0);
      y1[i] = out.ey1[i] * (1.0 + mn_scale * e1);
    }
    y[i] = a[i] == 1.0 ? y1[i] : y0[i];
  }

  out.ds.x = std::move(x);
  out.ds.a = std::move(a);
  out.ds.y = std::move(y);
  out.ds.oracle = OracleColumns{std::move(tau), std::move(mu), std::move(y0), std::move(y1)};
  out.ds.validate();
  return out;
}

}  // namespace nurobust
