#pragma once

#include "nurobust/matrix.hpp"
#include "nurobust/tape.hpp"

#include <string>
#include <vector>

namespace nurobust {

enum class Activation { kIdentity, kElu, kSigmoid };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Feed-forward network; the unit of every learnable function in the repo
// (outcome heads, propensity, direct tau nets, SNet parts).
struct MlpModel {
  std::vector<int> widths;  // input width first, output width last
  Activation hidden = Activation::kElu;
  Activation output = Activation::kIdentity;
  std::vector<Matrix> weights;  // widths[i] x widths[i+1]
  std::vector<Matrix> biases;   // 1 x widths[i+1]

  static MlpModel init(std::vector<int> widths, Activation hidden, Activation output, Rng& rng);

  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }

  // Builds the forward graph on `tape`. Parameter node ids (w0, b0, w1, b1,
  // ...) are appended to `param_nodes` when non-null.
  Tape::NodeId forward(Tape& tape, Tape::NodeId x,
                       std::vector<Tape::NodeId>* param_nodes = nullptr,
                       bool trainable = true) const;

  // Tape-free evaluation; arithmetic is identical to forward().
  Matrix predict(const Matrix& x) const;
  Vector predict_col(const Matrix& x) const;  // convenience for 1-d outputs

  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::size_t parameter_count() const;
};

// Checkpoints: architecture plus flat parameter arrays, one JSON document.
void save_mlp(const MlpModel& m, const std::string& path);
MlpModel load_mlp(const std::string& path);

}  // namespace nurobust
