#include "nurobust/bounds.hpp"

#include "nurobust/dataset.hpp"

#include <cmath>
#include <fstream>

namespace nurobust {

double linear_bound_thm42(const LinearClassSpec& spec, const Vector& w) {
  if (w.size() == 0) throw std::invalid_argument("linear_bound_thm42: empty weights");
  double n = static_cast<double>(w.size());
  return spec.norm_bound_b * spec.norm_bound_x / n * std::sqrt(w.squaredNorm());
}

BoundReport weighted_rademacher_linear(const LinearClassSpec& spec, const Matrix& x,
                                       const Vector& w, long sigma_draws, std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  if (n == 0 || w.size() != n) throw std::invalid_argument("weighted_rademacher: bad inputs");
  if ((w.array() <= 0.0).any()) throw std::invalid_argument("weighted_rademacher: weights must be positive");

  // sup over the ball has the closed form (B/N) ||sum sigma_n w_n x_n||_2
  Matrix wx = w.asDiagonal() * x;  // n x d, rows w_n x_n

  BoundReport report;
  report.bound = linear_bound_thm42(spec, w);

  if (n <= 12) {
    report.exhaustive = true;
    report.sigma_draws = 1L << n;
    double acc = 0.0;
    for (long mask = 0; mask < (1L << n); ++mask) {
      Vector s = Vector::Zero(x.cols());
      for (Eigen::Index i = 0; i < n; ++i)
        s += ((mask >> i) & 1L) ? Vector(wx.row(i)) : Vector(-wx.row(i));
      acc += s.norm();
    }
    report.estimate = spec.norm_bound_b / static_cast<double>(n) * acc /
                      static_cast<double>(1L << n);
    report.std_error = 0.0;
    return report;
  }

  report.sigma_draws = sigma_draws;
  Rng rng(seed);
  double acc = 0.0;
  double acc2 = 0.0;
  for (long d = 0; d < sigma_draws; ++d) {
    Vector s = Vector::Zero(x.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      s += (rng() & 1ULL) ? Vector(wx.row(i)) : Vector(-wx.row(i));
    }
    double v = spec.norm_bound_b / static_cast<double>(n) * s.norm();
    acc += v;
    acc2 += v * v;
  }
  double mean = acc / static_cast<double>(sigma_draws);
  double var = std::max(0.0, acc2 / static_cast<double>(sigma_draws) - mean * mean);
  report.estimate = mean;
  report.std_error = std::sqrt(var / static_cast<double>(sigma_draws));
  return report;
}

namespace {

// Bounded weighted-regression testbed for the coverage experiment:
// ||x||_2 <= 1, |y| <= 1, true propensity in [0.25, 0.75] so w <= 4, and the
// instance loss kappa (y - theta^T x)^2 is 1-Lipschitz in theta^T x.
struct GapInstance {
  Matrix x;
  Vector w;
  Vector y;
};

struct GapGenerator {
  int dim;
  double b;  // parameter norm bound
  bool unit_weights;

  double kappa() const { return 1.0 / (2.0 * (1.0 + b)); }
  double c_prime() const { return (unit_weights ? 1.0 : 4.0) * kappa() * (1.0 + b) * (1.0 + b); }

  GapInstance sample(int n, Rng& rng) const {
    GapInstance inst;
    inst.x.resize(n, dim);
    inst.w.resize(n);
    inst.y.resize(n);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      Vector v(dim);
      for (int j = 0; j < dim; ++j) v[j] = gauss(rng);
      double norm = v.norm();
      if (norm == 0.0) norm = 1.0;
      double radius = std::pow(unif(rng), 1.0 / static_cast<double>(dim));
      inst.x.row(i) = (v / norm * radius).transpose();
      double mu = 0.25 + 0.5 / (1.0 + std::exp(-3.0 * inst.x(i, 0)));
      double a = unif(rng) < mu ? 1.0 : 0.0;
      inst.w[i] = unit_weights ? 1.0 : (a / mu + (1.0 - a) / (1.0 - mu));
      double mean = a * (0.5 * inst.x(i, 0) + 0.2) + (1.0 - a) * (-0.3 * inst.x(i, 0));
      inst.y[i] = mean + 0.25 * (2.0 * unif(rng) - 1.0);
    }
    return inst;
  }
};

// column j = mean over rows of w * kappa * (y - x theta_j)^2
Vector weighted_losses(const GapInstance& inst, const Matrix& thetas, double kappa) {
  Matrix preds = inst.x * thetas.transpose();  // n x grid
  Vector out(thetas.rows());
  for (Eigen::Index j = 0; j < thetas.rows(); ++j) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < inst.x.rows(); ++i) {
      double r = inst.y[i] - preds(i, j);
      acc += inst.w[i] * kappa * r * r;
    }
    out[j] = acc / static_cast<double>(inst.x.rows());
  }
  return out;
}

}  // namespace

CoverageReport generalization_gap_experiment(const GapExperimentConfig& cfg) {
  if (cfg.theta_grid < 1 || cfg.trials < 1 || cfg.n < 2)
    throw std::invalid_argument("generalization_gap_experiment: bad configuration");

  GapGenerator gen{cfg.dim, cfg.norm_bound_b, cfg.unit_weights};

  // Fixed finite hypothesis grid on the sphere ||theta|| = B.
  Rng grid_rng(derive_seed(cfg.seed, 1));
  Matrix thetas(cfg.theta_grid, cfg.dim);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int j = 0; j < cfg.theta_grid; ++j) {
    Vector v(cfg.dim);
    for (int k = 0; k < cfg.dim; ++k) v[k] = gauss(grid_rng);
    double norm = v.norm();
    if (norm == 0.0) norm = 1.0;
    thetas.row(j) = (v * (cfg.norm_bound_b / norm)).transpose();
  }

  // Population risk per grid point from one large independent sample.
  Rng pop_rng(derive_seed(cfg.seed, 2));
  GapInstance pop = gen.sample(static_cast<int>(cfg.population_n), pop_rng);
  Vector pop_loss = weighted_losses(pop, thetas, gen.kappa());

  // Population weighted Rademacher complexity over (D, sigma) draws.
  Rng rad_rng(derive_seed(cfg.seed, 3));
  double rad_acc = 0.0;
  for (long d = 0; d < cfg.rademacher_outer; ++d) {
    GapInstance di = gen.sample(cfg.n, rad_rng);
    Vector s = Vector::Zero(cfg.dim);
    for (int i = 0; i < cfg.n; ++i)
      s += (rad_rng() & 1ULL) ? Vector(di.w[i] * di.x.row(i).transpose())
                              : Vector(-di.w[i] * di.x.row(i).transpose());
    rad_acc += cfg.norm_bound_b / static_cast<double>(cfg.n) * s.norm();
  }

  CoverageReport report;
  report.trials = cfg.trials;
  report.rademacher = rad_acc / static_cast<double>(cfg.rademacher_outer);
  report.c_prime = gen.c_prime();
  report.concentration =
      report.c_prime / 2.0 * std::sqrt(std::log(1.0 / cfg.delta) / static_cast<double>(cfg.n));
  report.bound = 2.0 * report.rademacher + report.concentration;

  Rng trial_rng(derive_seed(cfg.seed, 4));
  for (int t = 0; t < cfg.trials; ++t) {
    GapInstance di = gen.sample(cfg.n, trial_rng);
    Vector emp = weighted_losses(di, thetas, gen.kappa());
    double gap = (pop_loss - emp).maxCoeff();
    report.max_gap = std::max(report.max_gap, gap);
    if (gap > report.bound) ++report.violations;
  }
  report.violation_fraction =
      static_cast<double>(report.violations) / static_cast<double>(report.trials);
  return report;
}

void write_bound_report_csv(const std::vector<BoundReport>& reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open bound report file: " + path);
  out << "estimate,bound,std_error,sigma_draws,exhaustive\n";
  for (const BoundReport& r : reports) {
    out << format_double(r.estimate) << "," << format_double(r.bound) << ","
        << format_double(r.std_error) << "," << r.sigma_draws << "," << (r.exhaustive ? 1 : 0)
        << "\n";
  }
}

}  // namespace nurobust
