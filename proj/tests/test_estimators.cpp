#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nurobust/estimators.hpp"
#include "nurobust/metrics.hpp"
#include "nurobust/synthetic.hpp"

#include <cmath>

using namespace nurobust;

TEST_CASE("ipw weights on hand-computed cases") {
  Vector mu(3), a(3);
  mu << 0.5, 0.2, 0.8;
  a << 1, 0, 1;
  Vector w = ipw_weights(mu, a);
  CHECK(w[0] == 2.0);
  CHECK(w[1] == 1.25);
  CHECK(w[2] == 1.25);
  for (int i = 0; i < 3; ++i) CHECK(w[i] >= 1.0);
}

TEST_CASE("transformed outcomes on a hand-computed row") {
  Dataset ds;
  ds.x = Matrix::Zero(2, 1);
  ds.a = Vector(2);
  ds.a << 1, 0;
  ds.y = Vector(2);
  ds.y << 2.0, -1.0;
  Vector f0(2), f1(2), mu(2);
  f0 << 0.0, 0.5;
  f1 << 1.0, 2.0;
  mu << 0.5, 0.25;

  Vector z_dr = transformed_outcome(ds, f0, f1, mu, TransformKind::kDr);
  // row 0: 1 - 0 + (2 - 1)/0.5 = 3
  CHECK(z_dr[0] == doctest::Approx(3.0).epsilon(1e-12));
  // row 1: 2 - 0.5 - (-1 - 0.5)/0.75 = 1.5 + 2 = 3.5
  CHECK(z_dr[1] == doctest::Approx(3.5).epsilon(1e-12));

  Vector z_ipw = transformed_outcome(ds, f0, f1, mu, TransformKind::kIpw);
  CHECK(z_ipw[0] == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(z_ipw[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-12));  // -(-1)/0.75

  // DR with f0 = f1 = 0 collapses to IPW exactly
  Vector zero = Vector::Zero(2);
  Vector z_dr0 = transformed_outcome(ds, zero, zero, mu, TransformKind::kDr);
  CHECK((z_dr0.array() == z_ipw.array()).all());
}

TEST_CASE("dr transform is insensitive to the outcome model at the true propensity") {
  // Exact two-point expectation over a in {0,1}: mu*z(a=1) + (1-mu)*z(a=0)
  // equals y1 - y0 for any plugged-in f0, f1.
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_real_distribution<double> unif(0.05, 0.95);
    double mu = unif(rng), y0 = unif(rng) * 4 - 2, y1 = unif(rng) * 4 - 2;
    double f0 = unif(rng) * 10 - 5, f1 = unif(rng) * 10 - 5;

    auto make = [&](double a, double y) {
      Dataset ds;
      ds.x = Matrix::Zero(1, 1);
      ds.a = Vector::Constant(1, a);
      ds.y = Vector::Constant(1, y);
      Vector vf0 = Vector::Constant(1, f0), vf1 = Vector::Constant(1, f1);
      Vector vmu = Vector::Constant(1, mu);
      return transformed_outcome(ds, vf0, vf1, vmu, TransformKind::kDr)[0];
    };
    double expectation = mu * make(1.0, y1) + (1 - mu) * make(0.0, y0);
    CHECK(expectation == doctest::Approx(y1 - y0).epsilon(1e-9));
  }
}

TEST_CASE("transformed outcome is unbiased for tau on the benchmark") {
  SyntheticConfig cfg;
  cfg.seed = 9;
  SyntheticSample s = sample_dataset(cfg, 30000);
  Vector zero = Vector::Zero(s.ds.n());
  Vector z = transformed_outcome(s.ds, zero, zero, s.ds.oracle->mu, TransformKind::kDr);
  double tau_bar = s.ds.oracle->tau.mean();
  CHECK(z.mean() == doctest::Approx(tau_bar).epsilon(0.05));
}

TEST_CASE("snet forward mixes heads by the factual arm and predicts consistently") {
  Rng rng(12);
  SNetArchitecture arch;
  arch.private_width = 8;
  arch.shared_width = 12;
  arch.head_width = 10;
  SNet net = SNet::init(6, arch, rng);
  Matrix x = gaussian_matrix(9, 6, rng);
  Vector a(9);
  for (int i = 0; i < 9; ++i) a[i] = double(i % 2);

  Tape t;
  Matrix a_col = a;
  auto nodes = snet_forward_nodes(t, net, t.leaf(x), t.leaf(a_col), true, true);
  const Matrix& y1 = t.value(nodes.y1hat);
  const Matrix& y0 = t.value(nodes.y0hat);
  const Matrix& yf = t.value(nodes.yhat);
  const Matrix& mu = t.value(nodes.muhat);
  for (int i = 0; i < 9; ++i) {
    CHECK(yf(i, 0) == (a[i] == 1.0 ? y1(i, 0) : y0(i, 0)));
    CHECK(mu(i, 0) > 0.0);
    CHECK(mu(i, 0) < 1.0);
  }

  SNetPrediction p = snet_predict(net, x);
  CHECK((p.y1.array() == y1.col(0).array()).all());
  CHECK((p.y0.array() == y0.col(0).array()).all());
  CHECK((p.mu.array() == mu.col(0).array()).all());

  // Head routing: perturbing phi1's last-layer weights moves y1hat only.
  SNet bumped = net;
  bumped.phi1.weights.back().array() += 0.25;
  SNetPrediction q = snet_predict(bumped, x);
  CHECK_FALSE((q.y1.array() == p.y1.array()).all());
  CHECK((q.y0.array() == p.y0.array()).all());
  CHECK((q.mu.array() == p.mu.array()).all());

  // And phi_mu feeds only the propensity head.
  SNet bumped2 = net;
  bumped2.phi_mu.weights.back().array() += 0.25;
  SNetPrediction r = snet_predict(bumped2, x);
  CHECK((r.y1.array() == p.y1.array()).all());
  CHECK((r.y0.array() == p.y0.array()).all());
  CHECK_FALSE((r.mu.array() == p.mu.array()).all());
}

TEST_CASE("tnet cate prediction is exactly f1 minus f0") {
  SyntheticConfig cfg;
  cfg.seed = 21;
  SyntheticSample s = sample_dataset(cfg, 600);
  auto [tr, va] = split_train_val(s.ds.without_oracle(), {0.3, 2});
  TrainOptions o;
  o.max_epochs = 15;
  o.seed = 5;
  TnetModel m = train_tnet(tr, va, {16, 8}, o);
  Matrix xq = s.ds.x.topRows(50);
  Vector tau = predict_cate(CateModel(m), xq);
  Vector manual = m.f1.predict_col(xq) - m.f0.predict_col(xq);
  CHECK((tau.array() == manual.array()).all());
}

TEST_CASE("arm regression requires both arms to appear in each split") {
  Dataset ds;
  ds.x = Matrix::Ones(6, 2);
  ds.a = Vector::Zero(6);  // control only
  ds.y = Vector::Ones(6);
  Rng rng(1);
  MlpModel m = MlpModel::init({2, 4, 1}, Activation::kElu, Activation::kIdentity, rng);
  TrainOptions o;
  o.max_epochs = 2;
  CHECK_THROWS(fit_arm_regression(m, ds, ds, 1.0, o));
}

TEST_CASE("pehe and the transformed-target metric agree on scale") {
  Rng rng(30);
  int n = 20000;
  Vector tau_true = gaussian_matrix(n, 1, rng).col(0);
  Vector tau_hat = tau_true.array() + 0.5;
  PeheValue p = pehe(tau_hat, tau_true);
  CHECK(p.mse == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(p.rmse == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(p.n_eval == n);

  // Randomized data with mu = 1/2: the transformed-target MSE decomposes as
  // PEHE + noise constant, so the gap between two estimators matches their
  // PEHE gap.
  Dataset ds;
  ds.x = Matrix::Zero(n, 1);
  ds.a = Vector(n);
  ds.y = Vector(n);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (int i = 0; i < n; ++i) {
    ds.a[i] = unif(rng) < 0.5 ? 1.0 : 0.0;
    double y1 = tau_true[i] + noise(rng), y0 = noise(rng);
    ds.y[i] = ds.a[i] == 1.0 ? y1 : y0;
  }
  double m_hat = mse_transformed_target(tau_hat, ds, 0.5);
  double m_true = mse_transformed_target(tau_true, ds, 0.5);
  CHECK(m_hat - m_true == doctest::Approx(0.25).epsilon(0.15));
}
