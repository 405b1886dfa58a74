#include "nurobust/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace nurobust {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc()) throw std::invalid_argument("unparseable float: '" + s + "'");
  return v;
}

void Dataset::validate() const {
  const int rows = n();
  if (a.size() != rows || y.size() != rows)
    throw std::invalid_argument("dataset: inconsistent row counts");
  require_finite(x, "covariates");
  require_finite(y, "outcomes");
  for (int i = 0; i < rows; ++i)
    if (a[i] != 0.0 && a[i] != 1.0)
      throw std::invalid_argument("dataset: non-binary action at row " + std::to_string(i));
  if (oracle) {
    if (oracle->tau.size() != rows || oracle->mu.size() != rows || oracle->y0.size() != rows ||
        oracle->y1.size() != rows)
      throw std::invalid_argument("dataset: oracle column length mismatch");
  }
}

Dataset Dataset::rows(const std::vector<int>& idx) const {
  Dataset out;
  out.x.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
  out.a.resize(static_cast<Eigen::Index>(idx.size()));
  out.y.resize(static_cast<Eigen::Index>(idx.size()));
  if (oracle) {
    out.oracle = OracleColumns{};
    out.oracle->tau.resize(static_cast<Eigen::Index>(idx.size()));
    out.oracle->mu.resize(static_cast<Eigen::Index>(idx.size()));
    out.oracle->y0.resize(static_cast<Eigen::Index>(idx.size()));
    out.oracle->y1.resize(static_cast<Eigen::Index>(idx.size()));
  }
  for (std::size_t i = 0; i < idx.size(); ++i) {
    int r = idx[i];
    out.x.row(static_cast<Eigen::Index>(i)) = x.row(r);
    out.a[static_cast<Eigen::Index>(i)] = a[r];
    out.y[static_cast<Eigen::Index>(i)] = y[r];
    if (oracle) {
      out.oracle->tau[static_cast<Eigen::Index>(i)] = oracle->tau[r];
      out.oracle->mu[static_cast<Eigen::Index>(i)] = oracle->mu[r];
      out.oracle->y0[static_cast<Eigen::Index>(i)] = oracle->y0[r];
      out.oracle->y1[static_cast<Eigen::Index>(i)] = oracle->y1[r];
    }
  }
  return out;
}

Dataset Dataset::without_oracle() const {
  Dataset out = *this;
  out.oracle.reset();
  return out;
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& ds, const SplitSpec& spec) {
  const int n = ds.n();
  if (n < 2) throw std::invalid_argument("split: need at least 2 rows");
  if (!(spec.val_ratio > 0.0 && spec.val_ratio < 1.0))
    throw std::invalid_argument("split: ratio must be in (0,1)");
  int n_val = static_cast<int>(std::llround(spec.val_ratio * n));
  if (n_val < 1 || n_val >= n)
    throw std::invalid_argument("split: ratio leaves an empty part for n=" + std::to_string(n));
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  Rng rng(spec.seed);
  // Fisher-Yates, fixed arithmetic so the split is stable across platforms
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[i], perm[j]);
  }
  std::vector<int> val_idx(perm.begin(), perm.begin() + n_val);
  std::vector<int> train_idx(perm.begin() + n_val, perm.end());
  return {ds.rows(train_idx), ds.rows(val_idx)};
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Dataset load_csv_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);
  std::vector<std::string> header = split_line(line);

  int d = 0;
  while (d < static_cast<int>(header.size()) && header[d] == "x_" + std::to_string(d)) ++d;
  if (d == 0) throw std::runtime_error("missing covariate columns x_0..: " + path);
  std::size_t col = static_cast<std::size_t>(d);
  auto expect = [&](const char* name) {
    if (col >= header.size() || header[col] != name)
      throw std::runtime_error(std::string("missing column '") + name + "' in " + path);
    ++col;
  };
  expect("a");
  expect("y");
  bool has_oracle = col + 4 <= header.size() && header[col] == "tau";
  if (has_oracle) {
    expect("tau");
    expect("mu");
    expect("y0");
    expect("y1");
  }
  if (col != header.size()) throw std::runtime_error("unexpected trailing columns in " + path);

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error("row " + std::to_string(line_no) + ": wrong cell count in " + path);
    std::vector<double> vals;
    vals.reserve(cells.size());
    for (const std::string& c : cells) vals.push_back(parse_double(c));
    double av = vals[static_cast<std::size_t>(d)];
    if (av != 0.0 && av != 1.0)
      throw std::runtime_error("row " + std::to_string(line_no) + ": non-binary action in " + path);
    rows.push_back(std::move(vals));
  }

  Dataset ds;
  const int n = static_cast<int>(rows.size());
  ds.x.resize(n, d);
  ds.a.resize(n);
  ds.y.resize(n);
  if (has_oracle) {
    ds.oracle = OracleColumns{};
    ds.oracle->tau.resize(n);
    ds.oracle->mu.resize(n);
    ds.oracle->y0.resize(n);
    ds.oracle->y1.resize(n);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) ds.x(i, j) = rows[i][static_cast<std::size_t>(j)];
    ds.a[i] = rows[i][static_cast<std::size_t>(d)];
    ds.y[i] = rows[i][static_cast<std::size_t>(d) + 1];
    if (has_oracle) {
      ds.oracle->tau[i] = rows[i][static_cast<std::size_t>(d) + 2];
      ds.oracle->mu[i] = rows[i][static_cast<std::size_t>(d) + 3];
      ds.oracle->y0[i] = rows[i][static_cast<std::size_t>(d) + 4];
      ds.oracle->y1[i] = rows[i][static_cast<std::size_t>(d) + 5];
    }
  }
  ds.validate();
  return ds;
}

void write_csv_dataset(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open dataset file for writing: " + path);
  for (int j = 0; j < ds.dim(); ++j) out << "x_" << j << ",";
  out << "a,y";
  if (ds.oracle) out << ",tau,mu,y0,y1";
  out << "\n";
  for (int i = 0; i < ds.n(); ++i) {
    for (int j = 0; j < ds.dim(); ++j) out << format_double(ds.x(i, j)) << ",";
    out << format_double(ds.a[i]) << "," << format_double(ds.y[i]);
    if (ds.oracle) {
      out << "," << format_double(ds.oracle->tau[i]) << "," << format_double(ds.oracle->mu[i])
          << "," << format_double(ds.oracle->y0[i]) << "," << format_double(ds.oracle->y1[i]);
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failure: " + path);
}

static const char* kResultHeader = "method,dataset,n,seed,metric,value,params";

void write_results(const std::vector<ResultRow>& rows, const std::string& path, bool append) {
  if (rows.empty()) throw std::invalid_argument("write_results: empty row list");
  for (const ResultRow& r : rows)
    if (!std::isfinite(r.value))
      throw std::invalid_argument("write_results: non-finite value for metric " + r.metric);
  bool exists = std::filesystem::exists(path);
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open results file: " + path);
  if (!append || !exists) out << kResultHeader << "\n";
  for (const ResultRow& r : rows) {
    out << r.method << "," << r.dataset << "," << r.n << "," << r.seed << "," << r.metric << ","
        << format_double(r.value) << "," << r.params << "\n";
  }
  if (!out) throw std::runtime_error("write failure: " + path);
}

std::vector<ResultRow> read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty results file: " + path);
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == kResultHeader) continue;
    std::vector<std::string> cells = split_line(line);
    if (cells.size() != 7) throw std::runtime_error("malformed results row: " + line);
    ResultRow r;
    r.method = cells[0];
    r.dataset = cells[1];
    r.n = std::stoi(cells[2]);
    r.seed = std::stoull(cells[3]);
    r.metric = cells[4];
    r.value = parse_double(cells[5]);
    r.params = cells[6];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace nurobust
