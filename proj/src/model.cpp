#include "dada/model.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dada {

namespace {

Eigen::MatrixXd glorot_uniform(long fan_in, long fan_out,
                               std::mt19937_64& rng) {
  double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Eigen::MatrixXd w(fan_in, fan_out);
  for (long i = 0; i < fan_in; ++i) {
    for (long j = 0; j < fan_out; ++j) w(i, j) = u(rng);
  }
  return w;
}

}  // namespace

DadaNetwork init_network(const std::vector<long>& dims, int K,
                         std::uint64_t seed) {
  if (dims.empty()) {
    throw std::invalid_argument("init_network: dims must be non-empty");
  }
  if (K < 1) {
    throw std::invalid_argument("init_network: K must be >= 1");
  }
  std::mt19937_64 rng(seed);
  DadaNetwork net;
  net.K = K;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    net.g_weights.push_back(glorot_uniform(dims[i], dims[i + 1], rng));
    net.g_biases.push_back(Eigen::MatrixXd::Zero(1, dims[i + 1]));
  }
  net.f_weight = glorot_uniform(dims.back(), K + 1, rng);
  net.f_bias = Eigen::MatrixXd::Zero(1, K + 1);
  return net;
}

ProbOutput forward(const DadaNetwork& net, const Eigen::MatrixXd& X) {
  if (X.cols() != net.input_dim()) {
    throw std::invalid_argument(
        "forward: feature dim " + std::to_string(X.cols()) +
        " does not match network input dim " +
        std::to_string(net.input_dim()));
  }
  Eigen::MatrixXd h = X;
  for (std::size_t i = 0; i < net.g_weights.size(); ++i) {
    h = ((h * net.g_weights[i]).rowwise() + net.g_biases[i].row(0))
            .cwiseMax(0.0);
  }
  ProbOutput out;
  out.K = net.K;
  out.logits = (h * net.f_weight).rowwise() + net.f_bias.row(0);
  out.p.resize(out.logits.rows(), out.logits.cols());
  for (long i = 0; i < out.logits.rows(); ++i) {
    Eigen::ArrayXd row = out.logits.row(i).array();
    row -= row.maxCoeff();
    Eigen::ArrayXd e = row.exp();
    out.p.row(i) = e / e.sum();
  }
  out.p_bar.resize(out.p.rows(), net.K);
  for (long i = 0; i < out.p.rows(); ++i) {
    double denom = 1.0 - out.p(i, net.K);
    out.p_bar.row(i) = out.p.row(i).head(net.K) / denom;
  }
  return out;
}

ForwardGraph forward_graph(Tape& tape, const DadaNetwork& net,
                           const Eigen::MatrixXd& X) {
  if (X.cols() != net.input_dim()) {
    throw std::invalid_argument(
        "forward_graph: feature dim " + std::to_string(X.cols()) +
        " does not match network input dim " +
        std::to_string(net.input_dim()));
  }
  ForwardGraph g;
  Var h = tape.input(X, false);
  for (std::size_t i = 0; i < net.g_weights.size(); ++i) {
    Var w = tape.input(net.g_weights[i], true);
    Var b = tape.input(net.g_biases[i], true);
    g.g_params.push_back(w);
    g.g_params.push_back(b);
    h = relu(add_rowvec(matmul(h, w), b));
  }
  Var fw = tape.input(net.f_weight, true);
  Var fb = tape.input(net.f_bias, true);
  g.f_params.push_back(fw);
  g.f_params.push_back(fb);
  g.logits = add_rowvec(matmul(h, fw), fb);
  g.p = softmax_rows(g.logits);
  return g;
}

Eigen::VectorXd domain_pred_vector(const Eigen::VectorXd& p, int k) {
  const int K = static_cast<int>(p.size()) - 1;
  if (k < 0 || k >= K) {
    throw std::invalid_argument("domain_pred_vector: category index out of "
                                "range");
  }
  double denom = p(k) + p(K);
  if (denom < 1e-12) denom = 1e-12;  // degenerate pair, clamped
  Eigen::VectorXd out = Eigen::VectorXd::Zero(K + 1);
  out(k) = p(k) / denom;
  out(K) = p(K) / denom;
  return out;
}

int predict_category(const Eigen::VectorXd& p_bar_row) {
  int best = 0;
  for (int k = 1; k < p_bar_row.size(); ++k) {
    if (p_bar_row(k) > p_bar_row(best)) best = k;
  }
  return best;
}

std::vector<int> predict_categories(const ProbOutput& out) {
  std::vector<int> preds(out.p_bar.rows());
  for (long i = 0; i < out.p_bar.rows(); ++i) {
    preds[i] = predict_category(out.p_bar.row(i).transpose());
  }
  return preds;
}

namespace {

void write_matrix(std::ostream& os, const std::string& name,
                  const Eigen::MatrixXd& m) {
  os << name << " " << m.rows() << " " << m.cols() << "\n";
  for (long i = 0; i < m.rows(); ++i) {
    for (long j = 0; j < m.cols(); ++j) {
      os << m(i, j) << (j + 1 == m.cols() ? '\n' : ' ');
    }
  }
}

Eigen::MatrixXd read_matrix(std::istream& is, const std::string& want) {
  std::string name;
  long r = 0, c = 0;
  if (!(is >> name >> r >> c) || name != want) {
    throw std::runtime_error("load_checkpoint: expected tensor '" + want +
                             "', got '" + name + "'");
  }
  Eigen::MatrixXd m(r, c);
  for (long i = 0; i < r; ++i) {
    for (long j = 0; j < c; ++j) {
      if (!(is >> m(i, j))) {
        throw std::runtime_error("load_checkpoint: truncated tensor " + want);
      }
    }
  }
  return m;
}

}  // namespace

void save_checkpoint(const DadaNetwork& net, const std::string& path) {
  std::ofstream f(path);
  if (!f) {
    throw std::runtime_error("save_checkpoint: cannot open " + path);
  }
  f << std::setprecision(17);
  f << "dada-checkpoint v1\n";
  f << "K " << net.K << " layers " << net.g_weights.size() << "\n";
  for (std::size_t i = 0; i < net.g_weights.size(); ++i) {
    write_matrix(f, "g_weight" + std::to_string(i), net.g_weights[i]);
    write_matrix(f, "g_bias" + std::to_string(i), net.g_biases[i]);
  }
  write_matrix(f, "f_weight", net.f_weight);
  write_matrix(f, "f_bias", net.f_bias);
}

DadaNetwork load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw std::runtime_error("load_checkpoint: cannot open " + path);
  }
  std::string magic, version;
  f >> magic >> version;
  if (magic != "dada-checkpoint" || version != "v1") {
    throw std::runtime_error("load_checkpoint: bad header in " + path);
  }
  std::string kw;
  int K = 0;
  std::size_t layers = 0;
  if (!(f >> kw >> K) || kw != "K" || !(f >> kw >> layers) || kw != "layers") {
    throw std::runtime_error("load_checkpoint: bad header in " + path);
  }
  DadaNetwork net;
  net.K = K;
  for (std::size_t i = 0; i < layers; ++i) {
    net.g_weights.push_back(read_matrix(f, "g_weight" + std::to_string(i)));
    net.g_biases.push_back(read_matrix(f, "g_bias" + std::to_string(i)));
  }
  net.f_weight = read_matrix(f, "f_weight");
  net.f_bias = read_matrix(f, "f_bias");
  return net;
}

}  // namespace dada
