#pragma once

#include "nurobust/metrics.hpp"
#include "nurobust/robust.hpp"
#include "nurobust/synthetic.hpp"

#include <string>
#include <vector>

namespace nurobust {

struct DatasetSpec {
  enum class Kind { kSynthetic, kCsv };
  Kind kind = Kind::kSynthetic;
  SyntheticConfig synthetic;  // seed is overridden per run
  int n = 5000;
  int test_n = 10000;
  std::string csv_path;
  std::string test_csv_path;
  // Known true propensity of a randomized CSV test split (dataset metadata).
  double true_propensity = -1.0;
  std::string tag = "synthetic";
};

struct ArchSpec {
  std::vector<int> separated_hidden = {200, 200, 200, 100, 100};
  SNetArchitecture snet;
};

struct GridSpec {
  std::vector<double> alpha0 = {1.0, 10.0};
  std::vector<double> gamma = {1.5, 2.0, 3.0};
  std::vector<double> beta = {10.0, 100.0, 300.0};
};

struct GridPoint {
  double alpha0 = 1.0;
  double gamma = 2.0;
  double beta = 100.0;
};

struct ExperimentConfig {
  DatasetSpec data;
  std::string method = "tnet";
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  GridSpec grid;
  ArchSpec arch;
  TrainOptions trainer;
  int min_epochs_robust = 40;
  double val_ratio = 0.3;
  double snet_bce_weight = 1.0;

  std::string params_string(const GridPoint& gp) const;
};

// Full protocol for one method: per seed, generate/load and split the data,
// pretrain nuisances where needed, fit every grid point, select by the
// method's own validation criterion, and evaluate on a fresh oracle test
// sample. Model selection never sees oracle columns or test rows.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, int jobs = 1);

ExperimentConfig experiment_config_from_json_file(const std::string& path);

struct AggregateRow {
  std::string method, dataset, metric;
  int n = 0;
  int runs = 0;
  double mean = 0.0;
  double std_error = 0.0;
};

std::vector<AggregateRow> aggregate_results(const std::vector<ResultRow>& rows);
void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path);
std::string format_aggregate_table(const std::vector<AggregateRow>& rows);

}  // namespace nurobust
