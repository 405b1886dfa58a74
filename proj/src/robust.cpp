#include "nurobust/robust.hpp"

#include <cmath>

namespace nurobust {

void lagrangian_update(LagrangianState& state, double evidence_value, double c) {
  double g = std::max(0.0, evidence_value - c);
  state.alpha += state.lambda * g;
  if (g > 0.0) {
    bool escalate = state.literal_escalation ? (g < state.tolerance_c * state.g_prev)
                                             : (g > state.improvement_ratio * state.g_prev);
    if (escalate) state.lambda *= state.gamma;
  }
  state.g_prev = g;
  state.g_last = g;
}

namespace {

Matrix as_col(const Vector& v) {
  Matrix m(v.size(), 1);
  m.col(0) = v;
  return m;
}

// -(1/N) sum a log(mu) + (1-a) log(1-mu)
Tape::NodeId evidence_node(Tape& t, Tape::NodeId mu, Tape::NodeId a, Tape::NodeId one_minus_a,
                           Tape::NodeId one_minus_mu) {
  Tape::NodeId ll =
      t.add(t.mul(a, t.log_elem(mu)), t.mul(one_minus_a, t.log_elem(one_minus_mu)));
  return t.scale(t.mean_all(ll), -1.0);
}

struct ZNodes {
  Tape::NodeId z;
  Tape::NodeId w;
  Tape::NodeId mu;
  Tape::NodeId a;
  Tape::NodeId one_minus_a;
  Tape::NodeId one_minus_mu;
};

// Builds mu(x), the IPW weight, and the DR transformed outcome on the tape;
// the same graph serves both the fixed-mu (DRNet) and adversarial cases.
ZNodes z_graph(Tape& t, const MlpModel& mu_model, const Matrix& x, const Vector& a,
               const Vector& y, const Vector& f0_pred, const Vector& f1_pred, bool mu_trainable,
               std::vector<Tape::NodeId>* mu_params) {
  ZNodes out;
  Tape::NodeId xn = t.leaf(x, false);
  out.a = t.leaf(as_col(a), false);
  Tape::NodeId yn = t.leaf(as_col(y), false);
  Tape::NodeId f0n = t.leaf(as_col(f0_pred), false);
  Tape::NodeId f1n = t.leaf(as_col(f1_pred), false);
  out.mu = mu_model.forward(t, xn, mu_params, mu_trainable);
  out.one_minus_a = t.scale(t.offset(out.a, -1.0), -1.0);
  out.one_minus_mu = t.scale(t.offset(out.mu, -1.0), -1.0);
  out.w = t.add(t.div(out.a, out.mu), t.div(out.one_minus_a, out.one_minus_mu));
  Tape::NodeId diff = t.sub(f1n, f0n);
  Tape::NodeId t1 = t.div(t.mul(out.a, t.sub(yn, f1n)), out.mu);
  Tape::NodeId t0 = t.div(t.mul(out.one_minus_a, t.sub(yn, f0n)), out.one_minus_mu);
  out.z = t.sub(t.add(diff, t1), t0);
  return out;
}

std::vector<int> tau_widths(int input_dim, const std::vector<int>& hidden) {
  std::vector<int> w{input_dim};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(1);
  return w;
}

struct LoopState {
  FitReport fit;
  std::vector<Matrix> best;
  std::vector<double> val_history;
};

void snapshot(const std::vector<Matrix*>& params, std::vector<Matrix>& dst) {
  dst.clear();
  for (const Matrix* p : params) dst.push_back(*p);
}

void restore(const std::vector<Matrix*>& params, const std::vector<Matrix>& src) {
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] = src[i];
}

// Shared DRNet / NuDRNet loop. With `adversary` false, no penalty or weight
// terms enter the graph, mu stays non-trainable, and no mu step or
// Lagrangian update runs; the theta-side arithmetic is identical in both
// modes, which is what the reduction-identity test checks.
DirectTauModel run_transformed_loop(const Dataset& train, const Dataset& val,
                                    const NuisanceTriple& nuisance,
                                    const std::vector<int>& hidden, const RobustConfig& cfg,
                                    bool adversary, RobustReport* report, const EpochHook& hook) {
  train.validate();
  val.validate();

  const double c = cfg.tolerance >= 0.0 ? cfg.tolerance : nuisance.tolerance;

  Rng init_rng(derive_seed(cfg.trainer.seed, 40));
  MlpModel tau = MlpModel::init(tau_widths(train.dim(), hidden), Activation::kElu,
                                Activation::kIdentity, init_rng);
  MlpModel mu = nuisance.mu0;  // adversary's starting point

  // Outcome heads are fixed throughout; precompute their predictions.
  Vector f0_tr = nuisance.f0.predict_col(train.x);
  Vector f1_tr = nuisance.f1.predict_col(train.x);
  Vector f0_val = nuisance.f0.predict_col(val.x);
  Vector f1_val = nuisance.f1.predict_col(val.x);

  // Validation target stays at the pre-trained mu0 in both modes.
  Vector z_val = transformed_outcome(val, f0_val, f1_val, nuisance.mu0.predict_col(val.x),
                                     TransformKind::kDr);

  LagrangianState state;
  state.alpha = cfg.alpha0;
  state.lambda = cfg.lambda0;
  state.gamma = cfg.gamma;
  state.improvement_ratio = cfg.improvement_ratio;
  state.literal_escalation = cfg.literal_escalation;
  state.tolerance_c = c;

  Optimizer opt_theta(cfg.trainer.optimizer, cfg.lr_theta, Direction::kMinimize);
  Optimizer opt_mu(cfg.trainer.optimizer, cfg.lr_mu, Direction::kMaximize);
  Rng batch_rng(derive_seed(cfg.trainer.seed, 41));

  auto val_metric = [&]() { return mse(tau.predict_col(val.x), z_val); };

  LoopState loop;
  loop.fit.best_val = val_metric();
  snapshot(tau.parameters(), loop.best);

  const int n = train.n();
  const bool step_mu = adversary && cfg.lr_mu > 0.0;
  for (int epoch = 0; epoch < cfg.trainer.max_epochs; ++epoch) {
    bool failed = false;
    for (const auto& batch : minibatch_indices(n, cfg.trainer.batch_size, batch_rng)) {
      try {
        Dataset db = train.rows(batch);
        Vector f0b(batch.size()), f1b(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
          f0b[static_cast<Eigen::Index>(i)] = f0_tr[batch[i]];
          f1b[static_cast<Eigen::Index>(i)] = f1_tr[batch[i]];
        }
        auto build = [&](Tape& t) {
          ObjectiveNodes obj;
          if (adversary) {
            obj = adversarial_objective(t, tau, mu, db.x, db.a, db.y, f0b, f1b, state, cfg.beta,
                                        c, true);
          } else {
            ZNodes zn = z_graph(t, mu, db.x, db.a, db.y, f0b, f1b, false, nullptr);
            Tape::NodeId xb = t.leaf(db.x, false);
            Tape::NodeId pred = tau.forward(t, xb, &obj.theta_params, true);
            Tape::NodeId r = t.sub(zn.z, pred);
            obj.mse_term = t.mean_all(t.mul(r, r));
            obj.loss = obj.mse_term;
          }
          return obj;
        };
        {
          Tape t;
          ObjectiveNodes obj = build(t);
          t.backward(obj.loss);
          std::vector<const Matrix*> theta_grads;
          for (Tape::NodeId id : obj.theta_params) theta_grads.push_back(&t.grad(id));
          if (step_mu && !cfg.alternating_steps) {
            std::vector<const Matrix*> mu_grads;
            for (Tape::NodeId id : obj.mu_params) mu_grads.push_back(&t.grad(id));
            opt_theta.step(tau.parameters(), theta_grads);
            opt_mu.step(mu.parameters(), mu_grads);
          } else {
            opt_theta.step(tau.parameters(), theta_grads);
          }
        }
        if (step_mu && cfg.alternating_steps) {
          Tape t;
          ObjectiveNodes obj = build(t);
          t.backward(obj.loss);
          std::vector<const Matrix*> mu_grads;
          for (Tape::NodeId id : obj.mu_params) mu_grads.push_back(&t.grad(id));
          opt_mu.step(mu.parameters(), mu_grads);
        }
      } catch (const NumericError&) {
        failed = true;
        break;
      }
    }
    loop.fit.epochs = epoch + 1;
    if (failed) {
      loop.fit.diverged = true;
      break;
    }
    if (adversary) {
      double ev = evidence(mu, train.x, train.a);
      lagrangian_update(state, ev, c);
    }
    double v = val_metric();
    if (!std::isfinite(v)) {
      loop.fit.diverged = true;
      break;
    }
    loop.val_history.push_back(v);
    if (hook) hook(epoch, tau);
    if (v < loop.fit.best_val) {
      loop.fit.best_val = v;
      loop.fit.best_epoch = epoch;
      snapshot(tau.parameters(), loop.best);
    }
    if (epoch + 1 >= cfg.trainer.min_epochs &&
        epoch - std::max(loop.fit.best_epoch, 0) >= cfg.trainer.patience)
      break;
  }

  restore(tau.parameters(), loop.best);

  if (report) {
    report->fit = loop.fit;
    report->tolerance = c;
    report->terminal_evidence = evidence(mu, train.x, train.a);
    Vector w = ipw_weights(mu.predict_col(train.x), train.a);
    report->terminal_mean_sq_weight = w.squaredNorm() / static_cast<double>(train.n());
    report->state = state;
    report->val_history = loop.val_history;
  }
  return DirectTauModel{std::move(tau)};
}

}  // namespace

ObjectiveNodes adversarial_objective(Tape& t, const MlpModel& tau, const MlpModel& mu,
                                     const Matrix& x, const Vector& a, const Vector& y,
                                     const Vector& f0_pred, const Vector& f1_pred,
                                     const LagrangianState& state, double beta, double c,
                                     bool mu_trainable) {
  ObjectiveNodes obj;
  ZNodes zn = z_graph(t, mu, x, a, y, f0_pred, f1_pred, mu_trainable, &obj.mu_params);
  Tape::NodeId xb = t.leaf(x, false);
  Tape::NodeId pred = tau.forward(t, xb, &obj.theta_params, true);
  Tape::NodeId r = t.sub(zn.z, pred);
  obj.mse_term = t.mean_all(t.mul(r, r));
  obj.mean_sq_weight = t.mean_all(t.mul(zn.w, zn.w));
  obj.evidence = evidence_node(t, zn.mu, zn.a, zn.one_minus_a, zn.one_minus_mu);
  obj.violation = t.relu(t.offset(obj.evidence, -c));
  Tape::NodeId loss = t.add(obj.mse_term, t.scale(obj.mean_sq_weight, -beta));
  loss = t.add(loss, t.scale(obj.violation, -state.alpha));
  loss = t.add(loss, t.scale(t.mul(obj.violation, obj.violation), -state.lambda));
  obj.loss = loss;
  return obj;
}

DirectTauModel train_drnet(const Dataset& train, const Dataset& val,
                           const NuisanceTriple& nuisance, const std::vector<int>& hidden,
                           const TrainOptions& opts, RobustReport* report, const EpochHook& hook) {
  RobustConfig cfg;
  cfg.trainer = opts;
  cfg.lr_theta = opts.lr;
  cfg.lr_mu = 0.0;
  cfg.beta = 0.0;
  return run_transformed_loop(train, val, nuisance, hidden, cfg, /*adversary=*/false, report,
                              hook);
}

DirectTauModel train_nudrnet(const Dataset& train, const Dataset& val,
                             const NuisanceTriple& nuisance, const std::vector<int>& hidden,
                             const RobustConfig& cfg, RobustReport* report,
                             const EpochHook& hook) {
  return run_transformed_loop(train, val, nuisance, hidden, cfg, /*adversary=*/true, report,
                              hook);
}

SNet tune_nusnet(const SNet& pretrained, const Dataset& train, const Dataset& val,
                 const RobustConfig& cfg, RobustReport* report) {
  train.validate();
  val.validate();
  SNet net = pretrained;

  double c = cfg.tolerance;
  if (c < 0.0) c = evidence_scores(snet_predict(net, val.x).mu, val.a);

  LagrangianState state;
  state.alpha = cfg.alpha0;
  state.lambda = cfg.lambda0;
  state.gamma = cfg.gamma;
  state.improvement_ratio = cfg.improvement_ratio;
  state.literal_escalation = cfg.literal_escalation;
  state.tolerance_c = c;

  std::vector<Matrix*> outcome_params;
  for (Matrix* p : net.h1.parameters()) outcome_params.push_back(p);
  for (Matrix* p : net.h0.parameters()) outcome_params.push_back(p);
  std::vector<Matrix*> mu_params = net.h_mu.parameters();

  Optimizer opt_theta(cfg.trainer.optimizer, cfg.lr_theta, Direction::kMinimize);
  Optimizer opt_mu(cfg.trainer.optimizer, cfg.lr_mu, Direction::kMaximize);
  Rng batch_rng(derive_seed(cfg.trainer.seed, 50));

  auto val_factual_mse = [&]() {
    SNetPrediction p = snet_predict(net, val.x);
    double acc = 0.0;
    for (int i = 0; i < val.n(); ++i) {
      double pred = val.a[i] == 1.0 ? p.y1[i] : p.y0[i];
      acc += (val.y[i] - pred) * (val.y[i] - pred);
    }
    return acc / static_cast<double>(val.n());
  };

  LoopState loop;
  loop.fit.best_val = val_factual_mse();
  std::vector<Matrix*> all_heads = outcome_params;
  all_heads.insert(all_heads.end(), mu_params.begin(), mu_params.end());
  snapshot(all_heads, loop.best);

  const int n = train.n();
  for (int epoch = 0; epoch < cfg.trainer.max_epochs; ++epoch) {
    bool failed = false;
    for (const auto& batch : minibatch_indices(n, cfg.trainer.batch_size, batch_rng)) {
      try {
        Dataset db = train.rows(batch);
        Tape t;
        Tape::NodeId xb = t.leaf(db.x, false);
        Tape::NodeId ab = t.leaf(as_col(db.a), false);
        Tape::NodeId yb = t.leaf(as_col(db.y), false);
        SNetNodes nodes = snet_forward_nodes(t, net, xb, ab, /*train_reps=*/false,
                                             /*train_heads=*/true);
        Tape::NodeId one_minus_a = t.scale(t.offset(ab, -1.0), -1.0);
        Tape::NodeId one_minus_mu = t.scale(t.offset(nodes.muhat, -1.0), -1.0);
        Tape::NodeId w = t.add(t.div(ab, nodes.muhat), t.div(one_minus_a, one_minus_mu));
        Tape::NodeId res = t.sub(yb, nodes.yhat);
        Tape::NodeId weighted = t.sum_all(t.mul(w, t.mul(res, res)));
        Tape::NodeId risk = t.div(weighted, t.sum_all(w));
        Tape::NodeId msw = t.mean_all(t.mul(w, w));
        Tape::NodeId ev = evidence_node(t, nodes.muhat, ab, one_minus_a, one_minus_mu);
        Tape::NodeId g = t.relu(t.offset(ev, -c));
        Tape::NodeId loss = t.add(risk, t.scale(msw, -cfg.beta));
        loss = t.add(loss, t.scale(g, -state.alpha));
        loss = t.add(loss, t.scale(t.mul(g, g), -state.lambda));
        t.backward(loss);
        std::vector<const Matrix*> theta_grads;
        for (Tape::NodeId id : nodes.outcome_head_params) theta_grads.push_back(&t.grad(id));
        std::vector<const Matrix*> mu_grads;
        for (Tape::NodeId id : nodes.mu_head_params) mu_grads.push_back(&t.grad(id));
        opt_theta.step(outcome_params, theta_grads);
        if (cfg.lr_mu > 0.0) opt_mu.step(mu_params, mu_grads);
      } catch (const NumericError&) {
        failed = true;
        break;
      }
    }
    loop.fit.epochs = epoch + 1;
    if (failed) {
      loop.fit.diverged = true;
      break;
    }
    double ev = evidence_scores(snet_predict(net, train.x).mu, train.a);
    lagrangian_update(state, ev, c);
    double v = val_factual_mse();
    if (!std::isfinite(v)) {
      loop.fit.diverged = true;
      break;
    }
    loop.val_history.push_back(v);
    if (v < loop.fit.best_val) {
      loop.fit.best_val = v;
      loop.fit.best_epoch = epoch;
      snapshot(all_heads, loop.best);
    }
    if (epoch + 1 >= cfg.trainer.min_epochs &&
        epoch - std::max(loop.fit.best_epoch, 0) >= cfg.trainer.patience)
      break;
  }

  restore(all_heads, loop.best);

  if (report) {
    report->fit = loop.fit;
    report->tolerance = c;
    Vector mu_tr = snet_predict(net, train.x).mu;
    report->terminal_evidence = evidence_scores(mu_tr, train.a);
    Vector w = ipw_weights(mu_tr, train.a);
    report->terminal_mean_sq_weight = w.squaredNorm() / static_cast<double>(train.n());
    report->state = state;
    report->val_history = loop.val_history;
  }
  return net;
}

}  // namespace nurobust
