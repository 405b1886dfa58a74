#include "nurobust/nuisance.hpp"

namespace nurobust {

namespace {

std::vector<int> full_widths(int input_dim, const std::vector<int>& hidden) {
  std::vector<int> w{input_dim};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(1);
  return w;
}

bool has_both_arms(const Dataset& ds) {
  bool a0 = false, a1 = false;
  for (int i = 0; i < ds.n(); ++i) (ds.a[i] == 1.0 ? a1 : a0) = true;
  return a0 && a1;
}

}  // namespace

std::pair<MlpModel, MlpModel> pretrain_outcome_heads(const Dataset& train, const Dataset& val,
                                                     const NuisanceOptions& opts) {
  if (!has_both_arms(train)) throw std::invalid_argument("pretrain_outcome_heads: an arm is absent");
  std::vector<int> widths = full_widths(train.dim(), opts.hidden);
  Rng rng0(derive_seed(opts.trainer.seed, 30));
  Rng rng1(derive_seed(opts.trainer.seed, 31));
  MlpModel f0 = MlpModel::init(widths, Activation::kElu, Activation::kIdentity, rng0);
  MlpModel f1 = MlpModel::init(widths, Activation::kElu, Activation::kIdentity, rng1);
  fit_arm_regression(f0, train, val, 0.0, opts.trainer);
  fit_arm_regression(f1, train, val, 1.0, opts.trainer);
  return {std::move(f0), std::move(f1)};
}

std::pair<MlpModel, double> pretrain_propensity(const Dataset& train, const Dataset& val,
                                                const NuisanceOptions& opts) {
  if (!has_both_arms(train)) throw std::invalid_argument("pretrain_propensity: single-class actions");
  std::vector<int> widths = full_widths(train.dim(), opts.hidden);
  Rng rng(derive_seed(opts.trainer.seed, 32));
  MlpModel mu = MlpModel::init(widths, Activation::kElu, Activation::kSigmoid, rng);
  fit_binary_classifier(mu, train.x, train.a, val.x, val.a, opts.trainer);
  double c = opts.tolerance_from_validation ? evidence(mu, val.x, val.a)
                                            : evidence(mu, train.x, train.a);
  return {std::move(mu), c};
}

NuisanceTriple pretrain_nuisance(const Dataset& train, const Dataset& val,
                                 const NuisanceOptions& opts) {
  auto [f0, f1] = pretrain_outcome_heads(train, val, opts);
  auto [mu0, c] = pretrain_propensity(train, val, opts);
  return NuisanceTriple{std::move(f0), std::move(f1), std::move(mu0), c};
}

}  // namespace nurobust
