#include "nurobust/experiment.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace nurobust {
namespace {

struct SeedData {
  Dataset train;  // oracle stripped
  Dataset val;    // oracle stripped
  std::optional<Dataset> test;       // oracle kept when available
  std::optional<Vector> train_mu;    // true propensity of the fitting rows
  std::optional<Vector> val_mu;
};

SeedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  Dataset pool;
  std::optional<Dataset> test;
  if (cfg.data.kind == DatasetSpec::Kind::kSynthetic) {
    SyntheticConfig sc = cfg.data.synthetic;
    sc.seed = derive_seed(seed, 100);
    pool = sample_dataset(sc, cfg.data.n).ds;
    sc.seed = derive_seed(seed, 101);
    test = sample_dataset(sc, cfg.data.test_n).ds;
  } else {
    pool = load_csv_dataset(cfg.data.csv_path);
    if (!cfg.data.test_csv_path.empty()) test = load_csv_dataset(cfg.data.test_csv_path);
  }
  auto [train, val] = split_train_val(pool, {cfg.val_ratio, derive_seed(seed, 102)});
  SeedData out;
  if (train.oracle) out.train_mu = train.oracle->mu;
  if (val.oracle) out.val_mu = val.oracle->mu;
  out.train = train.without_oracle();
  out.val = val.without_oracle();
  out.test = std::move(test);
  return out;
}

double factual_val_mse(const MlpModel& f0, const MlpModel& f1, const Dataset& val) {
  Vector p0 = f0.predict_col(val.x);
  Vector p1 = f1.predict_col(val.x);
  Vector pred = val.a.array() * p1.array() + (1.0 - val.a.array()) * p0.array();
  return mse(pred, val.y);
}

struct Candidate {
  CateModel model;
  double val_criterion = std::numeric_limits<double>::infinity();
  GridPoint point;
  bool gridded = false;  // whether the point fields are meaningful
};

RobustConfig make_robust_config(const ExperimentConfig& cfg, const GridPoint& gp,
                                std::uint64_t seed) {
  RobustConfig rc;
  rc.alpha0 = gp.alpha0;
  rc.lambda0 = gp.alpha0;
  rc.gamma = gp.gamma;
  rc.beta = gp.beta;
  rc.trainer = cfg.trainer;
  rc.trainer.seed = derive_seed(seed, 103);
  rc.trainer.min_epochs = cfg.min_epochs_robust;
  rc.lr_theta = cfg.trainer.lr;
  rc.lr_mu = cfg.trainer.lr;
  return rc;
}

std::vector<GridPoint> expand_grid(const GridSpec& g) {
  std::vector<GridPoint> out;
  for (double a : g.alpha0)
    for (double c : g.gamma)
      for (double b : g.beta) out.push_back({a, c, b});
  return out;
}

std::vector<ResultRow> run_one_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedData data = prepare_data(cfg, seed);
  TrainOptions topts = cfg.trainer;
  topts.seed = derive_seed(seed, 103);

  std::vector<ResultRow> rows;
  auto val_row = [&](double value, const std::string& params) {
    rows.push_back({cfg.method, cfg.data.tag, cfg.data.n, seed, "val_criterion", value, params});
  };

  Candidate best;
  if (cfg.method == "tnet") {
    TnetModel m = train_tnet(data.train, data.val, cfg.arch.separated_hidden, topts);
    best.val_criterion = factual_val_mse(m.f0, m.f1, data.val);
    best.model = std::move(m);
    val_row(best.val_criterion, cfg.params_string(best.point));
  } else if (cfg.method == "snet") {
    SNetTrainReport rep;
    SNet m = train_snet(data.train, data.val, cfg.arch.snet, topts, cfg.snet_bce_weight, &rep);
    best.val_criterion = rep.best_val_factual_mse;
    best.model = std::move(m);
    val_row(best.val_criterion, cfg.params_string(best.point));
  } else if (cfg.method == "nusnet") {
    TrainOptions pre = topts;
    SNetTrainReport prep;
    SNet base = train_snet(data.train, data.val, cfg.arch.snet, pre, cfg.snet_bce_weight, &prep);
    for (const GridPoint& gp : expand_grid(cfg.grid)) {
      RobustConfig rc = make_robust_config(cfg, gp, seed);
      RobustReport rep;
      SNet tuned = tune_nusnet(base, data.train, data.val, rc, &rep);
      val_row(rep.fit.best_val, cfg.params_string(gp));
      if (rep.fit.best_val < best.val_criterion) {
        best = {std::move(tuned), rep.fit.best_val, gp, true};
      }
    }
  } else if (cfg.method == "drnet" || cfg.method == "nudrnet" || cfg.method == "drnet_oracle") {
    NuisanceOptions nopts;
    nopts.hidden = cfg.arch.separated_hidden;
    nopts.trainer = topts;
    NuisanceTriple nuisance = pretrain_nuisance(data.train, data.val, nopts);
    if (cfg.method == "drnet") {
      RobustReport rep;
      DirectTauModel m = train_drnet(data.train, data.val, nuisance, cfg.arch.separated_hidden,
                                     topts, &rep);
      best = {std::move(m), rep.fit.best_val, {}, false};
      val_row(best.val_criterion, cfg.params_string(best.point));
    } else if (cfg.method == "drnet_oracle") {
      if (!data.train_mu || !data.val_mu)
        throw std::runtime_error("drnet_oracle needs true propensity columns");
      Vector f0_tr = nuisance.f0.predict_col(data.train.x);
      Vector f1_tr = nuisance.f1.predict_col(data.train.x);
      Vector f0_va = nuisance.f0.predict_col(data.val.x);
      Vector f1_va = nuisance.f1.predict_col(data.val.x);
      Vector z_tr = transformed_outcome(data.train, f0_tr, f1_tr, *data.train_mu,
                                        TransformKind::kDr);
      Vector z_va = transformed_outcome(data.val, f0_va, f1_va, *data.val_mu, TransformKind::kDr);
      Rng rng(derive_seed(topts.seed, 40));
      std::vector<int> widths = {data.train.dim()};
      widths.insert(widths.end(), cfg.arch.separated_hidden.begin(),
                    cfg.arch.separated_hidden.end());
      widths.push_back(1);
      DirectTauModel m{MlpModel::init(widths, Activation::kElu, Activation::kIdentity, rng)};
      FitReport rep = fit_regression(m.tau, data.train.x, z_tr, data.val.x, z_va, topts);
      best = {std::move(m), rep.best_val, {}, false};
      val_row(best.val_criterion, cfg.params_string(best.point));
    } else {
      for (const GridPoint& gp : expand_grid(cfg.grid)) {
        RobustConfig rc = make_robust_config(cfg, gp, seed);
        RobustReport rep;
        DirectTauModel m = train_nudrnet(data.train, data.val, nuisance,
                                         cfg.arch.separated_hidden, rc, &rep);
        val_row(rep.fit.best_val, cfg.params_string(gp));
        if (rep.fit.best_val < best.val_criterion) {
          best = {std::move(m), rep.fit.best_val, gp, true};
        }
      }
    }
  } else {
    throw std::runtime_error("unknown method: " + cfg.method);
  }

  std::string sel = cfg.params_string(best.point);
  rows.push_back({cfg.method, cfg.data.tag, cfg.data.n, seed, "selected_val_criterion",
                  best.val_criterion, sel});

  if (data.test) {
    Vector tau_hat = predict_cate(best.model, data.test->x);
    if (data.test->oracle) {
      PeheValue p = pehe(tau_hat, data.test->oracle->tau);
      rows.push_back({cfg.method, cfg.data.tag, cfg.data.n, seed, "pehe_mse", p.mse, sel});
      rows.push_back({cfg.method, cfg.data.tag, cfg.data.n, seed, "pehe_rmse", p.rmse, sel});
      rows.push_back({cfg.method, cfg.data.tag, cfg.data.n, seed, "mse_vs_transformed",
                      mse_transformed_target(tau_hat, *data.test, data.test->oracle->mu), sel});
    } else if (cfg.data.true_propensity > 0.0) {
      rows.push_back({cfg.method, cfg.data.tag, cfg.data.n, seed, "mse_vs_transformed",
                      mse_transformed_target(tau_hat, *data.test, cfg.data.true_propensity), sel});
    }
  }
  return rows;
}

}  // namespace

std::string ExperimentConfig::params_string(const GridPoint& gp) const {
  std::ostringstream os;
  if (method == "nudrnet" || method == "nusnet") {
    os << "alpha0=" << format_double(gp.alpha0) << ";gamma=" << format_double(gp.gamma)
       << ";beta=" << format_double(gp.beta) << ";";
  }
  os << "lr=" << format_double(trainer.lr) << ";batch=" << trainer.batch_size;
  return os.str();
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, int jobs) {
  const int n_seeds = static_cast<int>(cfg.seeds.size());
  std::vector<std::vector<ResultRow>> per_seed(n_seeds);
  std::vector<std::string> errors;
  std::mutex err_mutex;
  std::atomic<int> next{0};
  int n_workers = std::max(1, std::min(jobs, n_seeds));

  auto worker = [&] {
    for (int i = next.fetch_add(1); i < n_seeds; i = next.fetch_add(1)) {
      try {
        per_seed[i] = run_one_seed(cfg, cfg.seeds[i]);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mutex);
        errors.push_back("seed " + std::to_string(cfg.seeds[i]) + ": " + e.what());
      }
    }
  };
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (!errors.empty()) {
    std::string msg = "experiment failures:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw std::runtime_error(msg);
  }

  std::vector<ResultRow> out;
  for (auto& rows : per_seed) out.insert(out.end(), rows.begin(), rows.end());
  return out;
}

ExperimentConfig experiment_config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  nlohmann::json j = nlohmann::json::parse(in);

  ExperimentConfig cfg;
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    std::string kind = d.value("kind", "synthetic");
    if (kind == "synthetic") {
      cfg.data.kind = DatasetSpec::Kind::kSynthetic;
      cfg.data.synthetic.d_c = d.value("d_c", cfg.data.synthetic.d_c);
      cfg.data.synthetic.d_o = d.value("d_o", cfg.data.synthetic.d_o);
      cfg.data.synthetic.d_t = d.value("d_t", cfg.data.synthetic.d_t);
      cfg.data.synthetic.d = d.value("d", cfg.data.synthetic.d);
      cfg.data.synthetic.selection_strength =
          d.value("selection_strength", cfg.data.synthetic.selection_strength);
      cfg.data.synthetic.noise = noise_from_string(d.value("noise", "additive"));
      cfg.data.tag = d.value("tag", d.value("noise", "additive"));
    } else if (kind == "csv") {
      cfg.data.kind = DatasetSpec::Kind::kCsv;
      cfg.data.csv_path = d.at("path").get<std::string>();
      cfg.data.test_csv_path = d.value("test_path", std::string());
      cfg.data.true_propensity = d.value("true_propensity", -1.0);
      cfg.data.tag = d.value("tag", std::string("csv"));
    } else {
      throw std::runtime_error("unknown dataset kind: " + kind);
    }
    cfg.data.n = d.value("n", cfg.data.n);
    cfg.data.test_n = d.value("test_n", cfg.data.test_n);
  }
  cfg.method = j.value("method", cfg.method);
  if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    if (g.contains("alpha0")) cfg.grid.alpha0 = g["alpha0"].get<std::vector<double>>();
    if (g.contains("gamma")) cfg.grid.gamma = g["gamma"].get<std::vector<double>>();
    if (g.contains("beta")) cfg.grid.beta = g["beta"].get<std::vector<double>>();
  }
  if (j.contains("arch")) {
    const auto& a = j["arch"];
    if (a.contains("separated_hidden"))
      cfg.arch.separated_hidden = a["separated_hidden"].get<std::vector<int>>();
    if (a.contains("snet")) {
      const auto& s = a["snet"];
      cfg.arch.snet.rep_layers = s.value("rep_layers", cfg.arch.snet.rep_layers);
      cfg.arch.snet.private_width = s.value("private_width", cfg.arch.snet.private_width);
      cfg.arch.snet.shared_width = s.value("shared_width", cfg.arch.snet.shared_width);
      cfg.arch.snet.head_layers = s.value("head_layers", cfg.arch.snet.head_layers);
      cfg.arch.snet.head_width = s.value("head_width", cfg.arch.snet.head_width);
    }
  }
  if (j.contains("trainer")) {
    const auto& t = j["trainer"];
    cfg.trainer.lr = t.value("lr", cfg.trainer.lr);
    cfg.trainer.batch_size = t.value("batch_size", cfg.trainer.batch_size);
    cfg.trainer.max_epochs = t.value("max_epochs", cfg.trainer.max_epochs);
    cfg.trainer.patience = t.value("patience", cfg.trainer.patience);
    cfg.trainer.min_epochs = t.value("min_epochs", cfg.trainer.min_epochs);
  }
  cfg.min_epochs_robust = j.value("min_epochs_robust", cfg.min_epochs_robust);
  cfg.val_ratio = j.value("val_ratio", cfg.val_ratio);
  cfg.snet_bce_weight = j.value("snet_bce_weight", cfg.snet_bce_weight);
  return cfg;
}

std::vector<AggregateRow> aggregate_results(const std::vector<ResultRow>& rows) {
  // Ordered map keyed on first appearance later re-sorted lexically; a plain
  // std::map gives a deterministic output order directly.
  std::map<std::tuple<std::string, std::string, int, std::string>, std::vector<double>> groups;
  for (const auto& r : rows) {
    if (r.metric == "val_criterion") continue;  // per-grid-point scan rows
    groups[{r.method, r.dataset, r.n, r.metric}].push_back(r.value);
  }
  std::vector<AggregateRow> out;
  for (const auto& [key, vals] : groups) {
    AggregateRow ag;
    std::tie(ag.method, ag.dataset, ag.n, ag.metric) = key;
    ag.runs = static_cast<int>(vals.size());
    double sum = 0.0;
    for (double v : vals) sum += v;
    ag.mean = sum / ag.runs;
    if (ag.runs > 1) {
      double ss = 0.0;
      for (double v : vals) ss += (v - ag.mean) * (v - ag.mean);
      ag.std_error = std::sqrt(ss / (ag.runs - 1)) / std::sqrt(double(ag.runs));
    }
    out.push_back(std::move(ag));
  }
  return out;
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "method,dataset,n,metric,runs,mean,std_error\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.dataset << ',' << r.n << ',' << r.metric << ',' << r.runs << ','
        << format_double(r.mean) << ',' << format_double(r.std_error) << '\n';
  }
}

std::string format_aggregate_table(const std::vector<AggregateRow>& rows) {
  std::ostringstream os;
  os << "method        dataset       n       metric                 runs  mean +/- se\n";
  for (const auto& r : rows) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-13s %-13s %-7d %-22s %-5d %.4f +/- %.4f\n",
                  r.method.c_str(), r.dataset.c_str(), r.n, r.metric.c_str(), r.runs, r.mean,
                  r.std_error);
    os << buf;
  }
  return os.str();
}

}  // namespace nurobust
