#pragma once

#include "nurobust/dataset.hpp"
#include "nurobust/train.hpp"

#include <variant>

namespace nurobust {

// w = a/mu + (1-a)/(1-mu); always >= 1 for clamped mu.
Vector ipw_weights(const Vector& mu, const Vector& a);

enum class TransformKind { kIpw, kDr };

// Pseudo-label z whose conditional mean is tau(x).
// DR:  z = f1 - f0 + a (y - f1)/mu - (1-a)(y - f0)/(1-mu)
// IPW: z = a y / mu - (1-a) y / (1-mu)
Vector transformed_outcome(const Dataset& ds, const Vector& f0, const Vector& f1,
                           const Vector& mu, TransformKind kind);

struct TnetModel {
  MlpModel f0;
  MlpModel f1;
};

struct DirectTauModel {
  MlpModel tau;
};

// Five representation extractors and three heads. h1 consumes
// concat(phi1, phi_o, phi_c), h0 concat(phi0, phi_o, phi_c), and the
// propensity head concat(phi_mu, phi_c) with a sigmoid output.
struct SNetArchitecture {
  int rep_layers = 3;
  int private_width = 50;  // phi1, phi0, phi_o
  int shared_width = 100;  // phi_mu, phi_c
  int head_layers = 2;
  int head_width = 100;
};

struct SNet {
  MlpModel phi1, phi0, phi_o, phi_c, phi_mu;
  MlpModel h1, h0, h_mu;

  static SNet init(int input_dim, const SNetArchitecture& arch, Rng& rng);

  std::vector<Matrix*> representation_parameters();
  std::vector<Matrix*> head_parameters();  // h1 + h0 + h_mu
  std::vector<const Matrix*> representation_parameters() const;
};

struct SNetNodes {
  Tape::NodeId y1hat, y0hat, yhat, muhat;
  std::vector<Tape::NodeId> rep_params;
  std::vector<Tape::NodeId> outcome_head_params;  // h1 then h0
  std::vector<Tape::NodeId> mu_head_params;
};

// a may be -1 to skip the factual mix (yhat = y1hat then).
SNetNodes snet_forward_nodes(Tape& t, const SNet& net, Tape::NodeId x, Tape::NodeId a,
                             bool train_reps, bool train_heads);

struct SNetPrediction {
  Vector y1, y0, mu;
};
SNetPrediction snet_predict(const SNet& net, const Matrix& x);

using CateModel = std::variant<TnetModel, DirectTauModel, SNet>;

Vector predict_cate(const CateModel& model, const Matrix& x);

// Two independent potential-outcome regressions; tau = f1 - f0.
TnetModel train_tnet(const Dataset& train, const Dataset& val, const std::vector<int>& hidden,
                     const TrainOptions& opts);

struct SNetTrainReport {
  FitReport fit;
  double best_val_factual_mse = 0.0;
};

// Joint factual MSE + bce_weight * propensity BCE on all parameters; early
// stopping on validation factual MSE.
SNet train_snet(const Dataset& train, const Dataset& val, const SNetArchitecture& arch,
                const TrainOptions& opts, double bce_weight = 1.0,
                SNetTrainReport* report = nullptr);

// Per-arm fits used by TNet and the nuisance stage.
FitReport fit_arm_regression(MlpModel& model, const Dataset& train, const Dataset& val, double arm,
                             const TrainOptions& opts);

}  // namespace nurobust
