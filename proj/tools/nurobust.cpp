#include "nurobust/bounds.hpp"
#include "nurobust/experiment.hpp"
#include "nurobust/synthetic.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace nurobust;

namespace {

void ensure_parent(const std::string& path) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

int cmd_generate(const std::string& out, int n, std::uint64_t seed, const std::string& noise,
                 double selection_strength) {
  SyntheticConfig cfg;
  cfg.noise = noise_from_string(noise);
  cfg.selection_strength = selection_strength;
  cfg.seed = seed;
  SyntheticSample sample = sample_dataset(cfg, n);
  ensure_parent(out);
  write_csv_dataset(sample.ds, out);
  std::printf("wrote %d rows to %s (omega=%s, treated fraction=%s)\n", n, out.c_str(),
              format_double(sample.omega).c_str(),
              format_double(sample.ds.a.mean()).c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out, std::uint64_t seed_override,
              bool has_seed, int jobs, bool append) {
  ExperimentConfig cfg = experiment_config_from_json_file(config_path);
  if (has_seed) cfg.seeds = {seed_override};
  std::vector<ResultRow> rows = run_experiment(cfg, jobs);
  ensure_parent(out);
  write_results(rows, out, append);
  std::printf("%zu result rows -> %s\n", rows.size(), out.c_str());
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& methods,
              const std::string& out, int jobs) {
  ExperimentConfig cfg = experiment_config_from_json_file(config_path);
  ensure_parent(out);
  bool append = false;
  for (const std::string& m : methods) {
    ExperimentConfig mc = cfg;
    mc.method = m;
    std::vector<ResultRow> rows = run_experiment(mc, jobs);
    write_results(rows, out, append);
    append = true;
    std::printf("%s: %zu rows\n", m.c_str(), rows.size());
  }
  return 0;
}

int cmd_bounds(const std::string& out_dir, std::uint64_t seed, int trials, int n,
               bool unit_weights) {
  fs::create_directories(out_dir);

  // Part 1: empirical weighted Rademacher complexity vs the closed-form bound
  // across weight scales.
  Rng rng(derive_seed(seed, 1));
  LinearClassSpec spec;
  std::vector<BoundReport> reports;
  for (double scale : {1.0, 2.0, 4.0, 8.0}) {
    Matrix x = gaussian_matrix(10, spec.dim, rng);
    for (int i = 0; i < x.rows(); ++i) x.row(i) /= std::max(1.0, x.row(i).norm());
    Vector w = Vector::Ones(x.rows()) * scale;
    reports.push_back(weighted_rademacher_linear(spec, x, w, 100000, derive_seed(seed, 2)));
  }
  std::string rad_path = out_dir + "/rademacher.csv";
  write_bound_report_csv(reports, rad_path);

  // Part 2: coverage of the high-probability bound.
  GapExperimentConfig gc;
  gc.seed = seed;
  gc.trials = trials;
  gc.n = n;
  gc.unit_weights = unit_weights;
  CoverageReport cov = generalization_gap_experiment(gc);
  std::string cov_path = out_dir + "/coverage.csv";
  {
    std::FILE* f = std::fopen(cov_path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + cov_path);
    std::fprintf(f, "trials,violations,violation_fraction,bound,rademacher,concentration,c_prime,max_gap\n");
    std::fprintf(f, "%d,%d,%s,%s,%s,%s,%s,%s\n", cov.trials, cov.violations,
                 format_double(cov.violation_fraction).c_str(), format_double(cov.bound).c_str(),
                 format_double(cov.rademacher).c_str(), format_double(cov.concentration).c_str(),
                 format_double(cov.c_prime).c_str(), format_double(cov.max_gap).c_str());
    std::fclose(f);
  }
  std::printf("rademacher table -> %s\ncoverage (%d/%d violations, bound=%.4f) -> %s\n",
              rad_path.c_str(), cov.violations, cov.trials, cov.bound, cov_path.c_str());
  return 0;
}

int cmd_report(const std::string& results_path, const std::string& out_csv) {
  std::vector<ResultRow> rows = read_results(results_path);
  std::vector<AggregateRow> agg = aggregate_results(rows);
  if (!out_csv.empty()) {
    ensure_parent(out_csv);
    write_aggregate_csv(agg, out_csv);
  }
  std::fputs(format_aggregate_table(agg).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nuisance-robust treatment effect estimation"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Sample the synthetic benchmark to CSV");
  std::string gen_out = "data.csv";
  int gen_n = 5000;
  std::uint64_t gen_seed = 0;
  std::string gen_noise = "additive";
  double gen_sel = 3.0;
  gen->add_option("--out", gen_out, "Output CSV path");
  gen->add_option("--n", gen_n, "Number of rows");
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--noise", gen_noise, "additive | multiplicative");
  gen->add_option("--selection-strength", gen_sel, "Propensity logit scale");

  // train
  auto* train = app.add_subcommand("train", "Run one method from a JSON config");
  std::string train_config, train_out = "results.csv";
  std::uint64_t train_seed = 0;
  int train_jobs = 1;
  bool train_append = false;
  train->add_option("--config", train_config, "JSON experiment config")->required();
  train->add_option("--out", train_out, "Results CSV path");
  auto* seed_opt = train->add_option("--seed", train_seed, "Override config seeds with one seed");
  train->add_option("--jobs", train_jobs, "Parallel workers over seeds");
  train->add_flag("--append", train_append, "Append to an existing results CSV");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run several methods on the config's data");
  std::string sweep_config, sweep_out = "results.csv";
  std::vector<std::string> sweep_methods = {"tnet", "drnet", "snet", "nudrnet", "nusnet"};
  int sweep_jobs = 1;
  sweep->add_option("--config", sweep_config, "JSON experiment config")->required();
  sweep->add_option("--methods", sweep_methods, "Methods to run");
  sweep->add_option("--out", sweep_out, "Results CSV path");
  sweep->add_option("--jobs", sweep_jobs, "Parallel workers over seeds");

  // bounds
  auto* bounds = app.add_subcommand("bounds", "Rademacher and coverage verification tables");
  std::string bounds_dir = "bounds_out";
  std::uint64_t bounds_seed = 0;
  int bounds_trials = 500, bounds_n = 200;
  bool bounds_unit = false;
  bounds->add_option("--out-dir", bounds_dir, "Output directory");
  bounds->add_option("--seed", bounds_seed, "RNG seed");
  bounds->add_option("--trials", bounds_trials, "Coverage trials");
  bounds->add_option("--n", bounds_n, "Sample size per trial");
  bounds->add_flag("--unit-weights", bounds_unit, "Classical (unweighted) variant");

  // report
  auto* report = app.add_subcommand("report", "Aggregate a results CSV (mean +/- se)");
  std::string report_in, report_out;
  report->add_option("--results", report_in, "Results CSV to aggregate")->required();
  report->add_option("--out", report_out, "Aggregated CSV output (optional)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(gen_out, gen_n, gen_seed, gen_noise, gen_sel);
    if (train->parsed())
      return cmd_train(train_config, train_out, train_seed, seed_opt->count() > 0, train_jobs,
                       train_append);
    if (sweep->parsed()) return cmd_sweep(sweep_config, sweep_methods, sweep_out, sweep_jobs);
    if (bounds->parsed())
      return cmd_bounds(bounds_dir, bounds_seed, bounds_trials, bounds_n, bounds_unit);
    if (report->parsed()) return cmd_report(report_in, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
