#pragma once

#include "nurobust/estimators.hpp"
#include "nurobust/nuisance.hpp"

#include <functional>

namespace nurobust {

// Augmented-Lagrangian schedule for the evidence constraint E(mu) <= c.
struct LagrangianState {
  double alpha = 1.0;   // linear multiplier, nondecreasing
  double lambda = 1.0;  // quadratic coefficient, nondecreasing
  double gamma = 2.0;   // escalation factor, > 1
  double improvement_ratio = 0.9;  // rho: escalate when g_k > rho * g_{k-1}
  // Literal pseudocode reading: escalate when g_k < c * g_{k-1}.
  bool literal_escalation = false;
  double tolerance_c = 0.0;  // only used by the literal mode
  double g_prev = std::numeric_limits<double>::infinity();
  double g_last = 0.0;
};

// g_k = max{0, E - c}; alpha += lambda * g_k; lambda escalates when the
// violation did not improve enough.
void lagrangian_update(LagrangianState& state, double evidence_value, double c);

struct RobustConfig {
  double alpha0 = 1.0;
  double lambda0 = 1.0;
  double gamma = 2.0;
  double beta = 100.0;       // squared-weight coefficient
  double tolerance = -1.0;   // c; < 0 means "take it from the nuisance triple"
  double lr_theta = 1e-3;
  double lr_mu = 1e-3;
  double improvement_ratio = 0.9;
  bool literal_escalation = false;
  // Alternating mode rebuilds the objective between the theta and mu steps
  // instead of applying both steps from one evaluation.
  bool alternating_steps = false;
  TrainOptions trainer;  // lr field unused; lr_theta / lr_mu above
};

struct RobustReport {
  FitReport fit;
  double terminal_evidence = 0.0;        // E_train(mu) at termination
  double terminal_mean_sq_weight = 0.0;  // (1/N) sum w^2 at termination
  double tolerance = 0.0;                // the c actually used
  LagrangianState state;
  std::vector<double> val_history;
};

// Observes the tau model after every epoch (trajectory tests).
using EpochHook = std::function<void(int epoch, const MlpModel& tau)>;

// Node handles of the per-batch adversarial objective (Eq.-12-shaped):
//   J = mean((z_mu - tau(x))^2) - beta * mean(w^2)
//       - alpha * max{0, E(mu) - c} - lambda * max{0, E(mu) - c}^2
// theta descends on J, mu ascends.
struct ObjectiveNodes {
  Tape::NodeId loss = -1;
  Tape::NodeId mse_term = -1;
  Tape::NodeId mean_sq_weight = -1;
  Tape::NodeId evidence = -1;
  Tape::NodeId violation = -1;
  std::vector<Tape::NodeId> theta_params;
  std::vector<Tape::NodeId> mu_params;
};

ObjectiveNodes adversarial_objective(Tape& t, const MlpModel& tau, const MlpModel& mu,
                                     const Matrix& x, const Vector& a, const Vector& y,
                                     const Vector& f0_pred, const Vector& f1_pred,
                                     const LagrangianState& state, double beta, double c,
                                     bool mu_trainable);

// DR-Learner second stage: tau regressed on z at the fixed pre-trained mu0.
DirectTauModel train_drnet(const Dataset& train, const Dataset& val,
                           const NuisanceTriple& nuisance, const std::vector<int>& hidden,
                           const TrainOptions& opts, RobustReport* report = nullptr,
                           const EpochHook& hook = {});

// Adversarial min-max over (theta, mu) under the evidence constraint and
// squared-weight regularization; validation stays at the fixed mu0.
DirectTauModel train_nudrnet(const Dataset& train, const Dataset& val,
                             const NuisanceTriple& nuisance, const std::vector<int>& hidden,
                             const RobustConfig& cfg, RobustReport* report = nullptr,
                             const EpochHook& hook = {});

// Representation extractors frozen; outcome heads minimize and the propensity
// head maximizes the self-normalized weighted factual risk plus the same
// penalty terms. Validation criterion is the plain factual MSE.
SNet tune_nusnet(const SNet& pretrained, const Dataset& train, const Dataset& val,
                 const RobustConfig& cfg, RobustReport* report = nullptr);

}  // namespace nurobust
