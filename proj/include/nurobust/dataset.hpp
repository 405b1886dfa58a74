#pragma once

#include "nurobust/matrix.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nurobust {

// Per-row ground-truth columns available for synthetic (and stand-in) data.
struct OracleColumns {
  Vector tau;
  Vector mu;  // true propensity mu0(x)
  Vector y0;
  Vector y1;
};

struct Dataset {
  Matrix x;  // n x d covariates
  Vector a;  // binary actions
  Vector y;  // outcomes
  std::optional<OracleColumns> oracle;

  int n() const { return static_cast<int>(x.rows()); }
  int dim() const { return static_cast<int>(x.cols()); }

  void validate() const;  // row counts, binary a, finiteness
  Dataset rows(const std::vector<int>& idx) const;
  Dataset without_oracle() const;
};

struct SplitSpec {
  double val_ratio = 0.3;
  std::uint64_t seed = 0;
};

// Seeded shuffle split; |val| = round(ratio * n), both parts nonempty.
std::pair<Dataset, Dataset> split_train_val(const Dataset& ds, const SplitSpec& spec);

// CSV schema: header x_0..x_{d-1},a,y with optional trailing tau,mu,y0,y1.
Dataset load_csv_dataset(const std::string& path);
void write_csv_dataset(const Dataset& ds, const std::string& path);

struct ResultRow {
  std::string method;
  std::string dataset;
  int n = 0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
  std::string params;
};

// Fixed column order: method,dataset,n,seed,metric,value,params.
void write_results(const std::vector<ResultRow>& rows, const std::string& path,
                   bool append = false);
std::vector<ResultRow> read_results(const std::string& path);

// Shortest round-trip decimal form of a double (bit-exact reload).
std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace nurobust
