#pragma once

#include "nurobust/estimators.hpp"

namespace nurobust {

// Pre-trained outcome heads f0, f1 plus propensity mu0 and the ambiguity
// tolerance c frozen at early stopping.
struct NuisanceTriple {
  MlpModel f0;
  MlpModel f1;
  MlpModel mu0;
  double tolerance = 0.0;
};

struct NuisanceOptions {
  std::vector<int> hidden = {200, 200, 200, 100, 100};  // rep 3x200 + head 2x100
  TrainOptions trainer;
  // Tolerance c from validation evidence by default; train evidence optional.
  bool tolerance_from_validation = true;
};

std::pair<MlpModel, MlpModel> pretrain_outcome_heads(const Dataset& train, const Dataset& val,
                                                     const NuisanceOptions& opts);

// Returns (mu0, c) where c is the evidence of the early-stopped model.
std::pair<MlpModel, double> pretrain_propensity(const Dataset& train, const Dataset& val,
                                                const NuisanceOptions& opts);

NuisanceTriple pretrain_nuisance(const Dataset& train, const Dataset& val,
                                 const NuisanceOptions& opts);

}  // namespace nurobust
