#include "nurobust/train.hpp"

#include <cmath>

namespace nurobust {

double mse(const Vector& pred, const Vector& target) {
  if (pred.size() != target.size() || pred.size() == 0)
    throw std::invalid_argument("mse: length mismatch or empty");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

double evidence_scores(const Vector& mu, const Vector& a) {
  if (mu.size() != a.size() || mu.size() == 0)
    throw std::invalid_argument("evidence: length mismatch or empty");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    double m = std::clamp(mu[i], kSigmoidClamp, 1.0 - kSigmoidClamp);
    acc -= a[i] * std::log(m) + (1.0 - a[i]) * std::log(1.0 - m);
  }
  return acc / static_cast<double>(mu.size());
}

double evidence(const MlpModel& mu_model, const Matrix& x, const Vector& a) {
  return evidence_scores(mu_model.predict_col(x), a);
}

std::vector<std::vector<int>> minibatch_indices(int n, int batch_size, Rng& rng) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size) {
    int end = std::min(n, start + batch_size);
    batches.emplace_back(perm.begin() + start, perm.begin() + end);
  }
  return batches;
}

namespace {

enum class LossKind { kMse, kBce };

Matrix gather_rows(const Matrix& x, const std::vector<int>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  return out;
}

Matrix gather_col(const Vector& v, const std::vector<int>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), 1);
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i), 0) = v[idx[i]];
  return out;
}

// -(1/N) sum a log(p) + (1-a) log(1-p) over tape nodes
Tape::NodeId bce_node(Tape& t, Tape::NodeId p, Tape::NodeId a) {
  Tape::NodeId one_minus_a = t.scale(t.offset(a, -1.0), -1.0);
  Tape::NodeId one_minus_p = t.scale(t.offset(p, -1.0), -1.0);
  Tape::NodeId ll = t.add(t.mul(a, t.log_elem(p)), t.mul(one_minus_a, t.log_elem(one_minus_p)));
  return t.scale(t.mean_all(ll), -1.0);
}

Tape::NodeId mse_node(Tape& t, Tape::NodeId pred, Tape::NodeId target) {
  Tape::NodeId r = t.sub(pred, target);
  return t.mean_all(t.mul(r, r));
}

FitReport fit_supervised(MlpModel& model, const Matrix& x_train, const Vector& t_train,
                         const Matrix& x_val, const Vector& t_val, const TrainOptions& opts,
                         LossKind kind) {
  if (x_train.rows() == 0 || x_val.rows() == 0)
    throw std::invalid_argument("fit: empty train or validation set");
  if (x_train.rows() != t_train.size() || x_val.rows() != t_val.size())
    throw std::invalid_argument("fit: target length mismatch");

  auto val_metric = [&]() {
    Vector p = model.predict_col(x_val);
    return kind == LossKind::kMse ? mse(p, t_val) : evidence_scores(p, t_val);
  };

  Optimizer opt(opts.optimizer, opts.lr, Direction::kMinimize);
  Rng batch_rng(derive_seed(opts.seed, 1));

  FitReport report;
  report.best_val = val_metric();
  std::vector<Matrix> best;
  for (const Matrix* p : model.parameters()) best.push_back(*p);

  const int n = static_cast<int>(x_train.rows());
  for (int epoch = 0; epoch < opts.max_epochs; ++epoch) {
    bool failed = false;
    for (const auto& batch : minibatch_indices(n, opts.batch_size, batch_rng)) {
      try {
        Tape tape;
        Tape::NodeId xb = tape.leaf(gather_rows(x_train, batch), false);
        Tape::NodeId tb = tape.leaf(gather_col(t_train, batch), false);
        std::vector<Tape::NodeId> param_nodes;
        Tape::NodeId pred = model.forward(tape, xb, &param_nodes, true);
        Tape::NodeId loss =
            kind == LossKind::kMse ? mse_node(tape, pred, tb) : bce_node(tape, pred, tb);
        tape.backward(loss);
        std::vector<const Matrix*> grads;
        grads.reserve(param_nodes.size());
        for (Tape::NodeId id : param_nodes) grads.push_back(&tape.grad(id));
        opt.step(model.parameters(), grads);
      } catch (const NumericError&) {
        failed = true;
        break;
      }
    }
    report.epochs = epoch + 1;
    if (failed) {
      report.diverged = true;
      break;
    }
    double v = val_metric();
    if (!std::isfinite(v)) {
      report.diverged = true;
      break;
    }
    if (v < report.best_val) {
      report.best_val = v;
      report.best_epoch = epoch;
      std::size_t i = 0;
      for (const Matrix* p : model.parameters()) best[i++] = *p;
    }
    if (epoch + 1 >= opts.min_epochs && epoch - std::max(report.best_epoch, 0) >= opts.patience)
      break;
  }

  std::size_t i = 0;
  for (Matrix* p : model.parameters()) *p = best[i++];
  return report;
}

}  // namespace

FitReport fit_regression(MlpModel& model, const Matrix& x_train, const Vector& y_train,
                         const Matrix& x_val, const Vector& y_val, const TrainOptions& opts) {
  return fit_supervised(model, x_train, y_train, x_val, y_val, opts, LossKind::kMse);
}

FitReport fit_binary_classifier(MlpModel& model, const Matrix& x_train, const Vector& a_train,
                                const Matrix& x_val, const Vector& a_val,
                                const TrainOptions& opts) {
  if (model.output != Activation::kSigmoid)
    throw std::invalid_argument("fit_binary_classifier: model needs a sigmoid output");
  return fit_supervised(model, x_train, a_train, x_val, a_val, opts, LossKind::kBce);
}

GradCheckReport grad_check(const MlpModel& model, const LossBuilder& loss) {
  GradCheckReport report;
  report.n_params = model.parameter_count();

  Tape tape;
  std::vector<Tape::NodeId> params;
  Tape::NodeId l = loss(tape, model, params);
  tape.backward(l);
  std::vector<Matrix> ad_grads;
  for (Tape::NodeId id : params) {
    if (tape.requires_grad(id)) {
      ad_grads.push_back(tape.grad(id));
    } else {
      ad_grads.push_back(Matrix::Zero(tape.value(id).rows(), tape.value(id).cols()));
    }
  }

  auto eval = [&loss](const MlpModel& m) {
    Tape t;
    std::vector<Tape::NodeId> ps;
    Tape::NodeId node = loss(t, m, ps);
    return t.value(node)(0, 0);
  };

  // Five-point stencil: O(h^4) truncation keeps the oracle itself well below
  // the tolerance the tape gradients are held to.
  const double h = 1e-4;
  MlpModel probe = model;
  std::vector<Matrix*> probe_params = probe.parameters();
  for (std::size_t k = 0; k < probe_params.size(); ++k) {
    Matrix& p = *probe_params[k];
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      double orig = p.data()[i];
      auto at = [&](double delta) {
        p.data()[i] = orig + delta;
        return eval(probe);
      };
      double fd = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12.0 * h);
      p.data()[i] = orig;
      double ad = ad_grads[k].data()[i];
      double rel = std::abs(ad - fd) / (std::abs(ad) + std::abs(fd) + 1e-8);
      report.max_rel_error = std::max(report.max_rel_error, rel);
    }
  }
  return report;
}

}  // namespace nurobust
