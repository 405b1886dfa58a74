#include "nurobust/mlp.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace nurobust {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kElu: return "elu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::kIdentity;
  if (s == "elu") return Activation::kElu;
  if (s == "sigmoid") return Activation::kSigmoid;
  throw std::invalid_argument("unknown activation: " + s);
}

MlpModel MlpModel::init(std::vector<int> widths, Activation hidden, Activation output, Rng& rng) {
  if (widths.size() < 2) throw std::invalid_argument("MlpModel needs at least two widths");
  for (int w : widths)
    if (w <= 0) throw std::invalid_argument("layer widths must be positive");
  MlpModel m;
  m.widths = std::move(widths);
  m.hidden = hidden;
  m.output = output;
  for (std::size_t i = 0; i + 1 < m.widths.size(); ++i) {
    int fan_in = m.widths[i];
    int fan_out = m.widths[i + 1];
    double sd = std::sqrt(2.0 / (fan_in + fan_out));
    m.weights.push_back(gaussian_matrix(fan_in, fan_out, rng, sd));
    m.biases.push_back(Matrix::Zero(1, fan_out));
  }
  return m;
}

namespace {
Tape::NodeId apply_activation(Tape& t, Tape::NodeId h, Activation a) {
  switch (a) {
    case Activation::kIdentity: return h;
    case Activation::kElu: return t.elu(h);
    case Activation::kSigmoid: return t.sigmoid_clamped(h);
  }
  return h;
}
}  // namespace

Tape::NodeId MlpModel::forward(Tape& tape, Tape::NodeId x,
                               std::vector<Tape::NodeId>* param_nodes, bool trainable) const {
  if (tape.value(x).cols() != input_dim()) throw TapeError("forward: input width mismatch");
  Tape::NodeId h = x;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    Tape::NodeId w = tape.leaf(weights[i], trainable);
    Tape::NodeId b = tape.leaf(biases[i], trainable);
    if (param_nodes) {
      param_nodes->push_back(w);
      param_nodes->push_back(b);
    }
    h = tape.add_row_broadcast(tape.matmul(h, w), b);
    bool last = (i + 1 == weights.size());
    h = apply_activation(tape, h, last ? output : hidden);
  }
  return h;
}

Matrix MlpModel::predict(const Matrix& x) const {
  Tape t;
  Tape::NodeId out = forward(t, t.leaf(x, false), nullptr, false);
  return t.value(out);
}

Vector MlpModel::predict_col(const Matrix& x) const {
  Matrix out = predict(x);
  if (out.cols() != 1) throw std::invalid_argument("predict_col: output is not 1-d");
  return out.col(0);
}

std::vector<Matrix*> MlpModel::parameters() {
  std::vector<Matrix*> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back(&weights[i]);
    out.push_back(&biases[i]);
  }
  return out;
}

std::vector<const Matrix*> MlpModel::parameters() const {
  std::vector<const Matrix*> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back(&weights[i]);
    out.push_back(&biases[i]);
  }
  return out;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* p : parameters()) n += static_cast<std::size_t>(p->size());
  return n;
}

void save_mlp(const MlpModel& m, const std::string& path) {
  nlohmann::json j;
  j["widths"] = m.widths;
  j["hidden"] = to_string(m.hidden);
  j["output"] = to_string(m.output);
  std::vector<double> flat;
  for (const Matrix* p : m.parameters())
    flat.insert(flat.end(), p->data(), p->data() + p->size());
  j["parameters"] = flat;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out << j.dump();
}

MlpModel load_mlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  Rng rng(0);
  MlpModel m = MlpModel::init(j.at("widths").get<std::vector<int>>(),
                              activation_from_string(j.at("hidden").get<std::string>()),
                              activation_from_string(j.at("output").get<std::string>()), rng);
  std::vector<double> flat = j.at("parameters").get<std::vector<double>>();
  std::size_t off = 0;
  for (Matrix* p : m.parameters()) {
    if (off + p->size() > flat.size()) throw std::runtime_error("checkpoint parameter count mismatch");
    std::copy(flat.begin() + off, flat.begin() + off + p->size(), p->data());
    off += static_cast<std::size_t>(p->size());
  }
  if (off != flat.size()) throw std::runtime_error("checkpoint parameter count mismatch");
  return m;
}

}  // namespace nurobust
