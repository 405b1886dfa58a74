#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nurobust/mlp.hpp"
#include "nurobust/optimizer.hpp"
#include "nurobust/tape.hpp"
#include "nurobust/train.hpp"

#include <cmath>

using namespace nurobust;

namespace {

// Central-difference oracle for an arbitrary scalar graph over leaf matrices.
using GraphBuilder = std::function<Tape::NodeId(Tape&, const std::vector<Tape::NodeId>&)>;

double eval_graph(const GraphBuilder& build, const std::vector<Matrix>& leaves) {
  Tape t;
  std::vector<Tape::NodeId> ids;
  for (const auto& m : leaves) ids.push_back(t.leaf(m, true));
  return t.value(build(t, ids))(0, 0);
}

double max_rel_fd_error(const GraphBuilder& build, std::vector<Matrix> leaves) {
  Tape t;
  std::vector<Tape::NodeId> ids;
  for (const auto& m : leaves) ids.push_back(t.leaf(m, true));
  t.backward(build(t, ids));

  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    Matrix g = t.grad(ids[k]);
    for (Eigen::Index i = 0; i < leaves[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < leaves[k].cols(); ++j) {
        double orig = leaves[k](i, j);
        leaves[k](i, j) = orig + h;
        double up = eval_graph(build, leaves);
        leaves[k](i, j) = orig - h;
        double dn = eval_graph(build, leaves);
        leaves[k](i, j) = orig;
        double fd = (up - dn) / (2 * h);
        double rel = std::abs(g(i, j) - fd) / (std::abs(g(i, j)) + std::abs(fd) + 1e-8);
        worst = std::max(worst, rel);
      }
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("elementwise op composite matches finite differences across seeds") {
  GraphBuilder build = [](Tape& t, const std::vector<Tape::NodeId>& v) {
    auto prod = t.mul(v[0], v[1]);
    auto quot = t.div(prod, t.offset(t.relu(v[2]), 1.25));
    auto mixed = t.sub(t.add(quot, t.scale(v[0], 0.5)), v[1]);
    auto squashed = t.log_elem(t.offset(t.sigmoid_clamped(mixed), 0.5));
    auto wide = t.concat_cols({squashed, t.elu(v[2])});
    return t.mean_all(t.mul(wide, wide));
  };
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    std::vector<Matrix> leaves = {gaussian_matrix(3, 4, rng), gaussian_matrix(3, 4, rng),
                                  gaussian_matrix(3, 4, rng)};
    CAPTURE(seed);
    CHECK(max_rel_fd_error(build, leaves) < 1e-5);
  }
}

TEST_CASE("matmul / broadcast / sum composite matches finite differences") {
  GraphBuilder build = [](Tape& t, const std::vector<Tape::NodeId>& v) {
    auto h = t.elu(t.add_row_broadcast(t.matmul(v[0], v[1]), v[2]));
    auto out = t.matmul(h, v[3]);
    return t.sum_all(t.mul(out, out));
  };
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    Rng rng(seed);
    std::vector<Matrix> leaves = {gaussian_matrix(5, 3, rng), gaussian_matrix(3, 4, rng),
                                  gaussian_matrix(1, 4, rng), gaussian_matrix(4, 2, rng)};
    CAPTURE(seed);
    CHECK(max_rel_fd_error(build, leaves) < 1e-5);
  }
}

TEST_CASE("mlp gradients match finite differences across seeds") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(derive_seed(seed, 9));
    auto model = MlpModel::init({4, 6, 5, 1}, Activation::kElu,
                                seed % 2 ? Activation::kSigmoid : Activation::kIdentity, rng);
    Matrix x = gaussian_matrix(7, 4, rng);
    Matrix target = gaussian_matrix(7, 1, rng);
    LossBuilder loss = [&](Tape& t, const MlpModel& m, std::vector<Tape::NodeId>& params) {
      auto pred = m.forward(t, t.leaf(x), &params);
      auto err = t.sub(pred, t.leaf(target));
      return t.mean_all(t.mul(err, err));
    };
    auto rep = grad_check(model, loss);
    CAPTURE(seed);
    CHECK(rep.n_params == model.parameter_count());
    CHECK(rep.max_rel_error < 1e-4);
  }
}

TEST_CASE("grad_scale(-1) is a gradient reversal and passes the value through") {
  Rng rng(7);
  Matrix x = gaussian_matrix(3, 3, rng);
  Tape t;
  auto a = t.leaf(x, true);
  auto flipped = t.grad_scale(a, -1.0);
  CHECK(t.value(flipped) == x);
  t.backward(t.mean_all(t.mul(flipped, flipped)));
  Matrix g = t.grad(a);

  Tape t2;
  auto b = t2.leaf(x, true);
  t2.backward(t2.mean_all(t2.mul(b, b)));
  Matrix g2 = t2.grad(b);
  CHECK(((g + g2).array() == 0.0).all());
}

TEST_CASE("elu and clamped sigmoid pointwise values") {
  Tape t;
  Matrix in(1, 3);
  in << -1.0, 0.0, 2.0;
  auto e = t.elu(t.leaf(in));
  CHECK(t.value(e)(0, 0) == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-12));
  CHECK(t.value(e)(0, 1) == 0.0);
  CHECK(t.value(e)(0, 2) == 2.0);

  Matrix z(1, 2);
  z << 0.0, -1e9;
  auto s = t.sigmoid_clamped(t.leaf(z));
  CHECK(t.value(s)(0, 0) == 0.5);
  CHECK(t.value(s)(0, 1) == kSigmoidClamp);
}

TEST_CASE("sigmoid derivative at zero is 0.25") {
  Tape t;
  Matrix z = Matrix::Zero(1, 1);
  auto a = t.leaf(z, true);
  t.backward(t.sum_all(t.sigmoid_clamped(a)));
  CHECK(t.grad(a)(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("a tape refuses a second backward pass and non-scalar losses") {
  Tape t;
  auto a = t.leaf(Matrix::Ones(2, 2), true);
  auto l = t.mean_all(a);
  t.backward(l);
  CHECK_THROWS_AS(t.backward(l), TapeError);

  Tape t2;
  auto b = t2.leaf(Matrix::Ones(2, 2), true);
  CHECK_THROWS_AS(t2.backward(b), TapeError);
}

TEST_CASE("non-finite values are rejected at construction") {
  Tape t;
  Matrix bad(1, 1);
  bad << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(t.leaf(bad), NumericError);
  auto a = t.leaf(Matrix::Constant(1, 1, 1e308), true);
  CHECK_THROWS_AS(t.add(a, a), NumericError);
}

TEST_CASE("maximize step equals a minimize step on the negated loss, bitwise") {
  for (OptKind kind : {OptKind::kSgd, OptKind::kAdam}) {
    Rng rng(11);
    Matrix p = gaussian_matrix(3, 2, rng);
    Matrix g = gaussian_matrix(3, 2, rng);
    Matrix p_max = p, p_min = p;
    Matrix g_neg = -g;

    Optimizer up(kind, 1e-2, Direction::kMaximize);
    up.step({&p_max}, {&g});
    Optimizer down(kind, 1e-2, Direction::kMinimize);
    down.step({&p_min}, {&g_neg});
    CHECK((p_max.array() == p_min.array()).all());
  }
}

TEST_CASE("first adam step moves every coordinate by lr in the gradient sign") {
  Matrix p = Matrix::Zero(2, 2);
  Matrix g(2, 2);
  g << 3.0, -0.5, 1e-3, -7.0;
  Optimizer opt(OptKind::kAdam, 1e-3, Direction::kMinimize);
  opt.step({&p}, {&g});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      // |step| = lr * g / (|g| + eps') ~= lr for the first update
      CHECK(p(i, j) == doctest::Approx(-1e-3 * (g(i, j) > 0 ? 1 : -1)).epsilon(1e-4));
    }
}

TEST_CASE("sgd step is p -= lr * g exactly") {
  Matrix p = Matrix::Ones(1, 2);
  Matrix g(1, 2);
  g << 2.0, -4.0;
  Optimizer opt(OptKind::kSgd, 0.5, Direction::kMinimize);
  opt.step({&p}, {&g});
  CHECK(p(0, 0) == 0.0);
  CHECK(p(0, 1) == 3.0);
}

TEST_CASE("optimizer rejects non-finite gradients") {
  Matrix p = Matrix::Zero(1, 1);
  Matrix g(1, 1);
  g << std::numeric_limits<double>::infinity();
  Optimizer opt(OptKind::kAdam, 1e-3);
  CHECK_THROWS_AS(opt.step({&p}, {&g}), NumericError);
}

TEST_CASE("identical seeds give bitwise identical training runs") {
  auto run = [] {
    Rng rng(42);
    auto m = MlpModel::init({3, 8, 1}, Activation::kElu, Activation::kIdentity, rng);
    Matrix x = gaussian_matrix(40, 3, rng);
    Vector y = gaussian_matrix(40, 1, rng).col(0);
    Matrix xv = gaussian_matrix(10, 3, rng);
    Vector yv = gaussian_matrix(10, 1, rng).col(0);
    TrainOptions o;
    o.max_epochs = 5;
    o.batch_size = 16;
    fit_regression(m, x, y, xv, yv, o);
    return m;
  };
  MlpModel a = run();
  MlpModel b = run();
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    CHECK((a.weights[i].array() == b.weights[i].array()).all());
    CHECK((a.biases[i].array() == b.biases[i].array()).all());
  }
}
