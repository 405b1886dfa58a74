#include "nurobust/estimators.hpp"

#include <cmath>

namespace nurobust {

Vector ipw_weights(const Vector& mu, const Vector& a) {
  if (mu.size() != a.size()) throw std::invalid_argument("ipw_weights: length mismatch");
  Vector w(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    double m = std::clamp(mu[i], kSigmoidClamp, 1.0 - kSigmoidClamp);
    w[i] = a[i] / m + (1.0 - a[i]) / (1.0 - m);
  }
  return w;
}

Vector transformed_outcome(const Dataset& ds, const Vector& f0, const Vector& f1,
                           const Vector& mu, TransformKind kind) {
  const int n = ds.n();
  if (f0.size() != n || f1.size() != n || mu.size() != n)
    throw std::invalid_argument("transformed_outcome: length mismatch");
  Vector z(n);
  for (int i = 0; i < n; ++i) {
    double m = std::clamp(mu[i], kSigmoidClamp, 1.0 - kSigmoidClamp);
    double a = ds.a[i];
    double y = ds.y[i];
    if (kind == TransformKind::kDr) {
      z[i] = f1[i] - f0[i] + a * (y - f1[i]) / m - (1.0 - a) * (y - f0[i]) / (1.0 - m);
    } else {
      z[i] = a * y / m - (1.0 - a) * y / (1.0 - m);
    }
  }
  return z;
}

namespace {

std::vector<int> arm_rows(const Dataset& ds, double arm) {
  std::vector<int> idx;
  for (int i = 0; i < ds.n(); ++i)
    if (ds.a[i] == arm) idx.push_back(i);
  return idx;
}

std::vector<int> rep_widths(int input_dim, int width, int layers) {
  std::vector<int> w{input_dim};
  for (int i = 0; i < layers; ++i) w.push_back(width);
  return w;
}

std::vector<int> head_widths(int input_dim, int width, int layers, int out) {
  std::vector<int> w{input_dim};
  for (int i = 0; i < layers; ++i) w.push_back(width);
  w.push_back(out);
  return w;
}

void append_params(std::vector<Matrix*>& dst, std::vector<Matrix*> src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

FitReport fit_arm_regression(MlpModel& model, const Dataset& train, const Dataset& val, double arm,
                             const TrainOptions& opts) {
  std::vector<int> tr = arm_rows(train, arm);
  std::vector<int> va = arm_rows(val, arm);
  if (tr.empty() || va.empty())
    throw std::invalid_argument("arm " + std::to_string(static_cast<int>(arm)) +
                                " absent from train or validation split");
  Dataset dtr = train.rows(tr);
  Dataset dva = val.rows(va);
  return fit_regression(model, dtr.x, dtr.y, dva.x, dva.y, opts);
}

TnetModel train_tnet(const Dataset& train, const Dataset& val, const std::vector<int>& hidden,
                     const TrainOptions& opts) {
  std::vector<int> widths{train.dim()};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  Rng rng0(derive_seed(opts.seed, 10));
  Rng rng1(derive_seed(opts.seed, 11));
  TnetModel m{MlpModel::init(widths, Activation::kElu, Activation::kIdentity, rng0),
              MlpModel::init(widths, Activation::kElu, Activation::kIdentity, rng1)};
  fit_arm_regression(m.f0, train, val, 0.0, opts);
  fit_arm_regression(m.f1, train, val, 1.0, opts);
  return m;
}

SNet SNet::init(int input_dim, const SNetArchitecture& arch, Rng& rng) {
  SNet s;
  auto rep = [&](int width) {
    return MlpModel::init(rep_widths(input_dim, width, arch.rep_layers), Activation::kElu,
                          Activation::kElu, rng);
  };
  s.phi1 = rep(arch.private_width);
  s.phi0 = rep(arch.private_width);
  s.phi_o = rep(arch.private_width);
  s.phi_c = rep(arch.shared_width);
  s.phi_mu = rep(arch.shared_width);
  int outcome_in = arch.private_width * 2 + arch.shared_width;
  int mu_in = arch.shared_width * 2;
  s.h1 = MlpModel::init(head_widths(outcome_in, arch.head_width, arch.head_layers, 1),
                        Activation::kElu, Activation::kIdentity, rng);
  s.h0 = MlpModel::init(head_widths(outcome_in, arch.head_width, arch.head_layers, 1),
                        Activation::kElu, Activation::kIdentity, rng);
  s.h_mu = MlpModel::init(head_widths(mu_in, arch.head_width, arch.head_layers, 1),
                          Activation::kElu, Activation::kSigmoid, rng);
  return s;
}

std::vector<Matrix*> SNet::representation_parameters() {
  std::vector<Matrix*> out;
  append_params(out, phi1.parameters());
  append_params(out, phi0.parameters());
  append_params(out, phi_o.parameters());
  append_params(out, phi_c.parameters());
  append_params(out, phi_mu.parameters());
  return out;
}

std::vector<const Matrix*> SNet::representation_parameters() const {
  std::vector<const Matrix*> out;
  for (const MlpModel* m : {&phi1, &phi0, &phi_o, &phi_c, &phi_mu})
    for (const Matrix* p : m->parameters()) out.push_back(p);
  return out;
}

std::vector<Matrix*> SNet::head_parameters() {
  std::vector<Matrix*> out;
  append_params(out, h1.parameters());
  append_params(out, h0.parameters());
  append_params(out, h_mu.parameters());
  return out;
}

SNetNodes snet_forward_nodes(Tape& t, const SNet& net, Tape::NodeId x, Tape::NodeId a,
                             bool train_reps, bool train_heads) {
  SNetNodes out;
  Tape::NodeId r1 = net.phi1.forward(t, x, &out.rep_params, train_reps);
  Tape::NodeId r0 = net.phi0.forward(t, x, &out.rep_params, train_reps);
  Tape::NodeId ro = net.phi_o.forward(t, x, &out.rep_params, train_reps);
  Tape::NodeId rc = net.phi_c.forward(t, x, &out.rep_params, train_reps);
  Tape::NodeId rm = net.phi_mu.forward(t, x, &out.rep_params, train_reps);
  out.y1hat = net.h1.forward(t, t.concat_cols({r1, ro, rc}), &out.outcome_head_params, train_heads);
  out.y0hat = net.h0.forward(t, t.concat_cols({r0, ro, rc}), &out.outcome_head_params, train_heads);
  out.muhat = net.h_mu.forward(t, t.concat_cols({rm, rc}), &out.mu_head_params, train_heads);
  if (a >= 0) {
    Tape::NodeId one_minus_a = t.scale(t.offset(a, -1.0), -1.0);
    out.yhat = t.add(t.mul(a, out.y1hat), t.mul(one_minus_a, out.y0hat));
  } else {
    out.yhat = out.y1hat;
  }
  return out;
}

SNetPrediction snet_predict(const SNet& net, const Matrix& x) {
  Tape t;
  Tape::NodeId xn = t.leaf(x, false);
  SNetNodes nodes = snet_forward_nodes(t, net, xn, -1, false, false);
  return SNetPrediction{t.value(nodes.y1hat).col(0), t.value(nodes.y0hat).col(0),
                        t.value(nodes.muhat).col(0)};
}

Vector predict_cate(const CateModel& model, const Matrix& x) {
  if (const auto* t = std::get_if<TnetModel>(&model))
    return t->f1.predict_col(x) - t->f0.predict_col(x);
  if (const auto* d = std::get_if<DirectTauModel>(&model)) return d->tau.predict_col(x);
  const SNet& s = std::get<SNet>(model);
  SNetPrediction p = snet_predict(s, x);
  return p.y1 - p.y0;
}

SNet train_snet(const Dataset& train, const Dataset& val, const SNetArchitecture& arch,
                const TrainOptions& opts, double bce_weight, SNetTrainReport* report) {
  Rng init_rng(derive_seed(opts.seed, 20));
  SNet net = SNet::init(train.dim(), arch, init_rng);

  auto val_factual_mse = [&]() {
    SNetPrediction p = snet_predict(net, val.x);
    double acc = 0.0;
    for (int i = 0; i < val.n(); ++i) {
      double pred = val.a[i] == 1.0 ? p.y1[i] : p.y0[i];
      acc += (val.y[i] - pred) * (val.y[i] - pred);
    }
    return acc / static_cast<double>(val.n());
  };

  std::vector<Matrix*> all_params = net.representation_parameters();
  append_params(all_params, net.head_parameters());

  Optimizer opt(opts.optimizer, opts.lr, Direction::kMinimize);
  Rng batch_rng(derive_seed(opts.seed, 21));

  FitReport fit;
  fit.best_val = val_factual_mse();
  std::vector<Matrix> best;
  for (const Matrix* p : all_params) best.push_back(*p);

  const int n = train.n();
  for (int epoch = 0; epoch < opts.max_epochs; ++epoch) {
    bool failed = false;
    for (const auto& batch : minibatch_indices(n, opts.batch_size, batch_rng)) {
      try {
        Dataset db = train.rows(batch);
        Tape tape;
        Tape::NodeId xb = tape.leaf(db.x, false);
        Tape::NodeId ab = tape.leaf(db.a, false);
        Tape::NodeId yb = tape.leaf(db.y, false);
        SNetNodes nodes = snet_forward_nodes(tape, net, xb, ab, true, true);
        Tape::NodeId res = tape.sub(yb, nodes.yhat);
        Tape::NodeId factual = tape.mean_all(tape.mul(res, res));
        Tape::NodeId one_minus_a = tape.scale(tape.offset(ab, -1.0), -1.0);
        Tape::NodeId one_minus_mu = tape.scale(tape.offset(nodes.muhat, -1.0), -1.0);
        Tape::NodeId ll = tape.add(tape.mul(ab, tape.log_elem(nodes.muhat)),
                                   tape.mul(one_minus_a, tape.log_elem(one_minus_mu)));
        Tape::NodeId bce = tape.scale(tape.mean_all(ll), -1.0);
        Tape::NodeId loss = tape.add(factual, tape.scale(bce, bce_weight));
        tape.backward(loss);
        std::vector<Tape::NodeId> param_nodes = nodes.rep_params;
        param_nodes.insert(param_nodes.end(), nodes.outcome_head_params.begin(),
                           nodes.outcome_head_params.end());
        param_nodes.insert(param_nodes.end(), nodes.mu_head_params.begin(),
                           nodes.mu_head_params.end());
        std::vector<const Matrix*> grads;
        for (Tape::NodeId id : param_nodes) grads.push_back(&tape.grad(id));
        opt.step(all_params, grads);
      } catch (const NumericError&) {
        failed = true;
        break;
      }
    }
    fit.epochs = epoch + 1;
    if (failed) {
      fit.diverged = true;
      break;
    }
    double v = val_factual_mse();
    if (!std::isfinite(v)) {
      fit.diverged = true;
      break;
    }
    if (v < fit.best_val) {
      fit.best_val = v;
      fit.best_epoch = epoch;
      std::size_t i = 0;
      for (const Matrix* p : all_params) best[i++] = *p;
    }
    if (epoch + 1 >= opts.min_epochs && epoch - std::max(fit.best_epoch, 0) >= opts.patience)
      break;
  }

  std::size_t i = 0;
  for (Matrix* p : all_params) *p = best[i++];
  if (report) {
    report->fit = fit;
    report->best_val_factual_mse = fit.best_val;
  }
  return net;
}

}  // namespace nurobust
