#pragma once

// Feature extractor G (ReLU MLP) and the integrated (K+1)-way category /
// domain classifier F: outputs 1..K are categories, output K+1 is the
// domain neuron. Zero-based in code: columns 0..K-1 and K.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "dada/tensor.hpp"

namespace dada {

struct DadaNetwork {
  // G: dense layers with ReLU after each.
  std::vector<Eigen::MatrixXd> g_weights;  // [in x out]
  std::vector<Eigen::MatrixXd> g_biases;   // [1 x out]
  // F: final affine map to K+1 logits.
  Eigen::MatrixXd f_weight;
  Eigen::MatrixXd f_bias;  // [1 x K+1]
  int K = 0;

  long input_dim() const {
    return g_weights.empty() ? f_weight.rows() : g_weights.front().rows();
  }
  long feature_dim() const { return f_weight.rows(); }
};

/// Per-batch probabilities: rows are instances, K+1 columns.
struct ProbOutput {
  Eigen::MatrixXd logits;
  Eigen::MatrixXd p;      // softmax of logits
  Eigen::MatrixXd p_bar;  // K columns: p_k / (1 - p_{K+1})
  int K = 0;
};

/// Glorot-uniform weights, zero biases; dims = {input, hidden...}.
DadaNetwork init_network(const std::vector<long>& dims, int K,
                         std::uint64_t seed);

/// Plain (non-differentiable) forward pass.
ProbOutput forward(const DadaNetwork& net, const Eigen::MatrixXd& X);

/// Differentiable forward pass: network parameters are registered on the
/// tape as requires_grad leaves so their gradients can be read back.
struct ForwardGraph {
  Var logits;               // n x (K+1)
  Var p;                    // softmax_rows(logits)
  std::vector<Var> g_params;  // weight, bias, weight, bias, ...
  std::vector<Var> f_params;  // weight, bias
};
ForwardGraph forward_graph(Tape& tape, const DadaNetwork& net,
                           const Eigen::MatrixXd& X);

/// Two-way renormalization of (p_k, p_{K+1}) for one instance.
/// k is zero-based; returns a (K+1)-vector with mass only at k and K.
Eigen::VectorXd domain_pred_vector(const Eigen::VectorXd& p, int k);

/// argmax over the K category entries of p_bar, ties to the lowest index.
/// Returns a zero-based category.
int predict_category(const Eigen::VectorXd& p_bar_row);
std::vector<int> predict_categories(const ProbOutput& out);

void save_checkpoint(const DadaNetwork& net, const std::string& path);
DadaNetwork load_checkpoint(const std::string& path);

}  // namespace dada
