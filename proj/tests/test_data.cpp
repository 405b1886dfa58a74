#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nurobust/dataset.hpp"
#include "nurobust/synthetic.hpp"

#include <cstdio>
#include <filesystem>

using namespace nurobust;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Dataset random_dataset(int n, int d, std::uint64_t seed, bool with_oracle) {
  Rng rng(seed);
  Dataset ds;
  ds.x = gaussian_matrix(n, d, rng);
  ds.a = Vector(n);
  for (int i = 0; i < n; ++i) ds.a[i] = double(rng() % 2);
  ds.y = gaussian_matrix(n, 1, rng).col(0) * 1e7;  // stress the CSV formatter
  if (with_oracle) {
    OracleColumns oc;
    oc.tau = gaussian_matrix(n, 1, rng).col(0);
    oc.mu = (gaussian_matrix(n, 1, rng).col(0).array().tanh() * 0.45 + 0.5).matrix();
    oc.y0 = gaussian_matrix(n, 1, rng).col(0) * 1e-7;
    oc.y1 = gaussian_matrix(n, 1, rng).col(0);
    ds.oracle = std::move(oc);
  }
  return ds;
}

}  // namespace

TEST_CASE("csv round trip is bit identical, with and without oracle columns") {
  for (bool oracle : {false, true}) {
    Dataset ds = random_dataset(37, 4, oracle ? 5u : 6u, oracle);
    std::string path = temp_path("nurobust_roundtrip.csv");
    write_csv_dataset(ds, path);
    Dataset back = load_csv_dataset(path);
    CHECK(back.n() == ds.n());
    CHECK(back.dim() == ds.dim());
    CHECK((back.x.array() == ds.x.array()).all());
    CHECK((back.a.array() == ds.a.array()).all());
    CHECK((back.y.array() == ds.y.array()).all());
    CHECK(back.oracle.has_value() == oracle);
    if (oracle) {
      CHECK((back.oracle->tau.array() == ds.oracle->tau.array()).all());
      CHECK((back.oracle->mu.array() == ds.oracle->mu.array()).all());
      CHECK((back.oracle->y0.array() == ds.oracle->y0.array()).all());
      CHECK((back.oracle->y1.array() == ds.oracle->y1.array()).all());
    }
    std::remove(path.c_str());
  }
}

TEST_CASE("format_double round-trips awkward values exactly") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-308, 6.02e23, 0.0, -0.0, 123456789.123456789}) {
    CHECK(parse_double(format_double(v)) == v);
  }
}

TEST_CASE("non-binary action column is rejected with the row index") {
  Dataset ds = random_dataset(5, 2, 1, false);
  ds.a[3] = 0.5;
  try {
    ds.validate();
    FAIL("expected a validation error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
}

TEST_CASE("split is a seeded partition") {
  Dataset ds = random_dataset(101, 3, 2, true);
  auto [tr, va] = split_train_val(ds, {0.3, 9});
  CHECK(va.n() == 30);
  CHECK(tr.n() == 71);
  CHECK(tr.oracle.has_value());

  // Partition: every original row appears exactly once across the two parts.
  std::vector<int> seen(ds.n(), 0);
  auto mark = [&](const Dataset& part) {
    for (int i = 0; i < part.n(); ++i)
      for (int j = 0; j < ds.n(); ++j)
        if ((part.x.row(i).array() == ds.x.row(j).array()).all() && part.y[i] == ds.y[j]) {
          ++seen[j];
          break;
        }
  };
  mark(tr);
  mark(va);
  for (int j = 0; j < ds.n(); ++j) CHECK(seen[j] == 1);

  auto [tr2, va2] = split_train_val(ds, {0.3, 9});
  CHECK((tr2.x.array() == tr.x.array()).all());
  auto [tr3, va3] = split_train_val(ds, {0.3, 10});
  CHECK_FALSE((tr3.x.array() == tr.x.array()).all());
}

TEST_CASE("results csv round trip") {
  std::vector<ResultRow> rows = {
      {"nudrnet", "an", 5000, 3, "pehe_rmse", 0.8612345, "alpha0=1;gamma=2;beta=100"},
      {"tnet", "mn", 500, 0, "pehe_mse", 12.5, "lr=0.001;batch=256"},
  };
  std::string path = temp_path("nurobust_results.csv");
  write_results(rows, path);
  write_results({rows[0]}, path, /*append=*/true);
  auto back = read_results(path);
  REQUIRE(back.size() == 3);
  CHECK(back[1].method == "tnet");
  CHECK(back[1].n == 500);
  CHECK(back[1].seed == 0);
  CHECK(back[0].value == rows[0].value);
  CHECK(back[2].params == rows[0].params);
  std::remove(path.c_str());
}

TEST_CASE("omega calibration recovers the chi-squared median") {
  // sum(x_c^2)/5 with x_c standard normal is chi2(5)/5; its median is
  // 4.35146.../5 = 0.87029...
  SyntheticConfig cfg;
  cfg.seed = 17;
  Matrix x = sample_covariates(cfg, 40001);
  double omega = calibrate_omega(cfg, x);
  CHECK(omega == doctest::Approx(0.87029).epsilon(0.02));
}

TEST_CASE("synthetic oracle columns are internally consistent") {
  SyntheticConfig cfg;
  cfg.seed = 5;
  SyntheticSample s = sample_dataset(cfg, 4000);
  s.ds.validate();
  REQUIRE(s.ds.oracle.has_value());
  const auto& oc = *s.ds.oracle;
  for (int i = 0; i < s.ds.n(); ++i) {
    auto row = s.ds.x.row(i);
    double sum_c = row.segment(0, cfg.d_c).array().square().sum();
    double sum_o = row.segment(cfg.d_c, cfg.d_o).array().square().sum();
    double sum_t = row.segment(cfg.d_c + cfg.d_o, cfg.d_t).array().square().sum();
    CHECK(oc.tau[i] == doctest::Approx(sum_t).epsilon(1e-12));
    CHECK(s.ey0[i] == doctest::Approx(sum_c + sum_o).epsilon(1e-12));
    double logit = cfg.selection_strength * (sum_c / cfg.d_c - s.omega);
    CHECK(oc.mu[i] == doctest::Approx(1.0 / (1.0 + std::exp(-logit))).epsilon(1e-12));
    CHECK(oc.mu[i] > 0.0);
    CHECK(oc.mu[i] < 1.0);
    // factual consistency
    double expect_y = s.ds.a[i] == 1.0 ? oc.y1[i] : oc.y0[i];
    CHECK(s.ds.y[i] == expect_y);
  }
  // treated fraction near 1/2 by the median calibration
  CHECK(s.ds.a.mean() == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("multiplicative noise scale matches 2/(sd(EY1)+sd(EY0))") {
  // Var EY0 = Var chi2(10) = 20, Var EY1 = Var chi2(15) = 30 =>
  // xi' ~ 2/(sqrt(30)+sqrt(20)) = 0.20102
  SyntheticConfig cfg;
  cfg.noise = NoiseKind::kMultiplicative;
  cfg.seed = 23;
  SyntheticSample s = sample_dataset(cfg, 30000);
  CHECK(s.mn_scale == doctest::Approx(0.20102).epsilon(0.03));
  // Noise enters multiplicatively: y0 = ey0 * (1 + xi' e)
  Vector ratio = (s.ds.oracle->y0.array() / s.ey0.array() - 1.0) / s.mn_scale;
  double m = ratio.mean();
  double v = (ratio.array() - m).square().mean();
  CHECK(m == doctest::Approx(0.0).epsilon(0.05));
  CHECK(v == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("additive and multiplicative settings share covariates and actions") {
  SyntheticConfig an;
  an.seed = 77;
  SyntheticConfig mn = an;
  mn.noise = NoiseKind::kMultiplicative;
  SyntheticSample sa = sample_dataset(an, 800);
  SyntheticSample sm = sample_dataset(mn, 800);
  CHECK((sa.ds.x.array() == sm.ds.x.array()).all());
  CHECK((sa.ds.a.array() == sm.ds.a.array()).all());
  CHECK_FALSE((sa.ds.y.array() == sm.ds.y.array()).all());
}

TEST_CASE("synthetic sampling is seed deterministic") {
  SyntheticConfig cfg;
  cfg.seed = 31;
  SyntheticSample a = sample_dataset(cfg, 300);
  SyntheticSample b = sample_dataset(cfg, 300);
  CHECK((a.ds.x.array() == b.ds.x.array()).all());
  CHECK((a.ds.y.array() == b.ds.y.array()).all());
  cfg.seed = 32;
  SyntheticSample c = sample_dataset(cfg, 300);
  CHECK_FALSE((a.ds.x.array() == c.ds.x.array()).all());
}
