#pragma once

#include "nurobust/mlp.hpp"
#include "nurobust/optimizer.hpp"

#include <functional>
#include <limits>

namespace nurobust {

struct TrainOptions {
  double lr = 1e-3;
  int batch_size = 256;
  int max_epochs = 200;
  int patience = 10;
  int min_epochs = 0;
  std::uint64_t seed = 0;
  OptKind optimizer = OptKind::kAdam;
};

struct FitReport {
  int epochs = 0;
  int best_epoch = -1;  // -1 means the initial parameters were never beaten
  double best_val = std::numeric_limits<double>::infinity();
  bool diverged = false;
};

// Supervised MSE fit with early stopping on validation MSE; the best-so-far
// parameters are restored before returning.
FitReport fit_regression(MlpModel& model, const Matrix& x_train, const Vector& y_train,
                         const Matrix& x_val, const Vector& y_val, const TrainOptions& opts);

// Binary cross-entropy fit (sigmoid output head), early stopping on
// validation evidence.
FitReport fit_binary_classifier(MlpModel& model, const Matrix& x_train, const Vector& a_train,
                                const Matrix& x_val, const Vector& a_val,
                                const TrainOptions& opts);

double mse(const Vector& pred, const Vector& target);

// Empirical evidence: mean binary cross-entropy of propensity scores.
double evidence_scores(const Vector& mu, const Vector& a);
double evidence(const MlpModel& mu_model, const Matrix& x, const Vector& a);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t n_params = 0;
};

// Builds a scalar loss over the model's parameter nodes.
using LossBuilder =
    std::function<Tape::NodeId(Tape&, const MlpModel&, std::vector<Tape::NodeId>& params)>;

// Compares reverse-mode gradients against central finite differences
// (step 1e-5) over every parameter entry.
GradCheckReport grad_check(const MlpModel& model, const LossBuilder& loss);

// Minibatch scheduling shared by all training loops: a seeded Fisher-Yates
// permutation re-drawn each epoch, sliced into batches (last one ragged).
std::vector<std::vector<int>> minibatch_indices(int n, int batch_size, Rng& rng);

}  // namespace nurobust
