#pragma once

// Reverse-mode automatic differentiation over dense Eigen matrices.
// A Tape owns the computation graph of one forward pass; Var is a cheap
// handle into it. The tape is rebuilt per training step (define-by-run).

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

namespace dada {

class Tape;

class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t index() const { return idx_; }

  const Eigen::MatrixXd& value() const;
  const Eigen::MatrixXd& grad() const;
  bool requires_grad() const;

  /// Value of a 1x1 node.
  double scalar() const;

  long rows() const { return value().rows(); }
  long cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* t, std::size_t i) : tape_(t), idx_(i) {}

  Tape* tape_ = nullptr;
  std::size_t idx_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a leaf tensor on the tape.
  Var input(Eigen::MatrixXd v, bool requires_grad = false);

  /// Accumulates d(root)/d(leaf) into every requires_grad node reachable
  /// from root. root must be 1x1. A second call without zero_grad() in
  /// between is rejected.
  void backward(const Var& root);

  /// Clears all gradients and re-arms backward().
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;  // allocated iff requires_grad
    bool requires_grad = false;
    std::function<void(Tape&)> back;  // empty for leaves
  };

  Var emplace(Eigen::MatrixXd value, bool requires_grad,
              std::function<void(Tape&)> back);
  Node& node(std::size_t i) { return nodes_[i]; }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  void add_grad(std::size_t i, const Eigen::MatrixXd& g);

  std::vector<Node> nodes_;
  bool backward_done_ = false;

  friend Var matmul(const Var&, const Var&);
  friend Var add(const Var&, const Var&);
  friend Var add_rowvec(const Var&, const Var&);
  friend Var sub(const Var&, const Var&);
  friend Var neg(const Var&);
  friend Var mul(const Var&, const Var&);
  friend Var div(const Var&, const Var&);
  friend Var scale(const Var&, double);
  friend Var add_const(const Var&, double);
  friend Var relu(const Var&);
  friend Var log(const Var&);
  friend Var exp(const Var&);
  friend Var clamp(const Var&, double, double);
  friend Var softmax_rows(const Var&);
  friend Var sum(const Var&);
  friend Var mean(const Var&);
  friend Var cols(const Var&, long, long);
  friend Var rows(const Var&, long, long);
  friend Var gather_cols(const Var&, const std::vector<int>&);
  friend Var broadcast_col(const Var&, long);
};

// Forward ops. All record a backward closure on the operands' tape.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
/// Adds a 1xC row vector to every row of a.
Var add_rowvec(const Var& a, const Var& r);
Var sub(const Var& a, const Var& b);
Var neg(const Var& a);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_const(const Var& a, double c);
Var relu(const Var& a);
/// Elementwise natural log; throws std::domain_error on non-positive input.
Var log(const Var& a);
Var exp(const Var& a);
Var clamp(const Var& a, double lo, double hi);
/// Row-wise softmax; each output row sums to 1.
Var softmax_rows(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
/// Column block [j, j+n).
Var cols(const Var& a, long j, long n);
/// Row block [i, i+n).
Var rows(const Var& a, long i, long n);
/// r(i, 0) = a(i, idx[i]).
Var gather_cols(const Var& a, const std::vector<int>& idx);
/// Replicates an Nx1 column n_cols times.
Var broadcast_col(const Var& v, long n_cols);

/// Central-difference gradient oracle: (f(x+h e_i) - f(x-h e_i)) / 2h.
Eigen::MatrixXd finite_diff_grad(
    const std::function<double(const Eigen::MatrixXd&)>& f,
    const Eigen::MatrixXd& x, double h);

}  // namespace dada
