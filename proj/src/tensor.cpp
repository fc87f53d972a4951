#include "dada/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace dada {

namespace {

std::string shape_str(const Eigen::MatrixXd& m) {
  std::ostringstream os;
  os << "[" << m.rows() << "x" << m.cols() << "]";
  return os.str();
}

void check_same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) {
    throw std::invalid_argument("operands live on different tapes");
  }
}

void check_same_shape(const char* op, const Eigen::MatrixXd& a,
                      const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a) + " vs " + shape_str(b));
  }
}

}  // namespace

const Eigen::MatrixXd& Var::value() const { return tape_->node(idx_).value; }
const Eigen::MatrixXd& Var::grad() const { return tape_->node(idx_).grad; }
bool Var::requires_grad() const { return tape_->node(idx_).requires_grad; }

double Var::scalar() const {
  const Eigen::MatrixXd& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw std::invalid_argument("scalar(): node has shape " + shape_str(v));
  }
  return v(0, 0);
}

Var Tape::input(Eigen::MatrixXd v, bool requires_grad) {
  return emplace(std::move(v), requires_grad, nullptr);
}

Var Tape::emplace(Eigen::MatrixXd value, bool requires_grad,
                  std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) {
    n.grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  }
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::add_grad(std::size_t i, const Eigen::MatrixXd& g) {
  Node& n = nodes_[i];
  if (n.requires_grad) n.grad += g;
}

void Tape::backward(const Var& root) {
  if (root.tape() != this) {
    throw std::invalid_argument("backward: root is not on this tape");
  }
  if (backward_done_) {
    throw std::logic_error("backward: called twice without zero_grad()");
  }
  const Node& r = nodes_[root.index()];
  if (r.value.rows() != 1 || r.value.cols() != 1) {
    throw std::invalid_argument("backward: root must be scalar, has shape " +
                                shape_str(r.value));
  }
  if (!r.requires_grad) {
    throw std::invalid_argument("backward: root is detached from any "
                                "requires_grad leaf");
  }
  backward_done_ = true;
  nodes_[root.index()].grad(0, 0) = 1.0;
  for (std::size_t i = root.index() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.back) n.back(*this);
  }
}

void Tape::zero_grad() {
  for (Node& n : nodes_) {
    if (n.requires_grad) n.grad.setZero();
  }
  backward_done_ = false;
}

namespace {

bool any_requires(const Var& a) { return a.requires_grad(); }
bool any_requires(const Var& a, const Var& b) {
  return a.requires_grad() || b.requires_grad();
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  check_same_tape(a, b);
  const Eigen::MatrixXd& av = a.value();
  const Eigen::MatrixXd& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(av) +
                                " vs " + shape_str(bv));
  }
  Tape& t = *a.tape();
  std::size_t ia = a.index(), ib = b.index();
  Var out = t.emplace(av * bv, any_requires(a, b), nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, ib, io](Tape& tp) {
    const Eigen::MatrixXd& g = tp.node(io).grad;
    tp.add_grad(ia, g * tp.node(ib).value.transpose());
    tp.add_grad(ib, tp.node(ia).value.transpose() * g);
  };
  return out;
}

Var add(const Var& a, const Var& b) {
  check_same_tape(a, b);
  check_same_shape("add", a.value(), b.value());
  Tape& t = *a.tape();
  std::size_t ia = a.index(), ib = b.index();
  Var out = t.emplace(a.value() + b.value(), any_requires(a, b), nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, ib, io](Tape& tp) {
    const Eigen::MatrixXd& g = tp.node(io).grad;
    tp.add_grad(ia, g);
    tp.add_grad(ib, g);
  };
  return out;
}

Var add_rowvec(const Var& a, const Var& r) {
  check_same_tape(a, r);
  const Eigen::MatrixXd& av = a.value();
  const Eigen::MatrixXd& rv = r.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw std::invalid_argument("add_rowvec: shape mismatch " + shape_str(av) +
                                " vs " + shape_str(rv));
  }
  Tape& t = *a.tape();
  std::size_t ia = a.index(), ir = r.index();
  Var out = t.emplace(av.rowwise() + rv.row(0), any_requires(a, r), nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, ir, io](Tape& tp) {
    const Eigen::MatrixXd& g = tp.node(io).grad;
    tp.add_grad(ia, g);
    tp.add_grad(ir, g.colwise().sum());
  };
  return out;
}

Var sub(const Var& a, const Var& b) {
  check_same_tape(a, b);
  check_same_shape("sub", a.value(), b.value());
  Tape& t = *a.tape();
  std::size_t ia = a.index(), ib = b.index();
  Var out = t.emplace(a.value() - b.value(), any_requires(a, b), nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, ib, io](Tape& tp) {
    const Eigen::MatrixXd& g = tp.node(io).grad;
    tp.add_grad(ia, g);
    tp.add_grad(ib, -g);
  };
  return out;
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var mul(const Var& a, const Var& b) {
  check_same_tape(a, b);
  check_same_shape("mul", a.value(), b.value());
  Tape& t = *a.tape();
  std::size_t ia = a.index(), ib = b.index();
  Var out = t.emplace(a.value().cwiseProduct(b.value()), any_requires(a, b),
                      nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, ib, io](Tape& tp) {
    const Eigen::MatrixXd& g = tp.node(io).grad;
    tp.add_grad(ia, g.cwiseProduct(tp.node(ib).value));
    tp.add_grad(ib, g.cwiseProduct(tp.node(ia).value));
  };
  return out;
}

Var div(const Var& a, const Var& b) {
  check_same_tape(a, b);
  check_same_shape("div", a.value(), b.value());
  Tape& t = *a.tape();
  std::size_t ia = a.index(), ib = b.index();
  Var out = t.emplace(a.value().cwiseQuotient(b.value()), any_requires(a, b),
                      nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, ib, io](Tape& tp) {
    const Eigen::MatrixXd& g = tp.node(io).grad;
    const Eigen::MatrixXd& bv = tp.node(ib).value;
    tp.add_grad(ia, g.cwiseQuotient(bv));
    tp.add_grad(ib, -g.cwiseProduct(tp.node(io).value).cwiseQuotient(bv));
  };
  return out;
}

Var scale(const Var& a, double c) {
  Tape& t = *a.tape();
  std::size_t ia = a.index();
  Var out = t.emplace(a.value() * c, any_requires(a), nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, io, c](Tape& tp) {
    tp.add_grad(ia, tp.node(io).grad * c);
  };
  return out;
}

Var add_const(const Var& a, double c) {
  Tape& t = *a.tape();
  std::size_t ia = a.index();
  Var out = t.emplace(a.value().array() + c, any_requires(a), nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, io](Tape& tp) {
    tp.add_grad(ia, tp.node(io).grad);
  };
  return out;
}

Var relu(const Var& a) {
  Tape& t = *a.tape();
  std::size_t ia = a.index();
  Var out = t.emplace(a.value().cwiseMax(0.0), any_requires(a), nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, io](Tape& tp) {
    const Eigen::MatrixXd& av = tp.node(ia).value;
    Eigen::MatrixXd mask = (av.array() > 0.0).cast<double>();
    tp.add_grad(ia, tp.node(io).grad.cwiseProduct(mask));
  };
  return out;
}

Var log(const Var& a) {
  if ((a.value().array() <= 0.0).any()) {
    throw std::domain_error("log: non-positive input; clamp first");
  }
  Tape& t = *a.tape();
  std::size_t ia = a.index();
  Var out = t.emplace(a.value().array().log(), any_requires(a), nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, io](Tape& tp) {
    tp.add_grad(ia, tp.node(io).grad.cwiseQuotient(tp.node(ia).value));
  };
  return out;
}

Var exp(const Var& a) {
  Tape& t = *a.tape();
  std::size_t ia = a.index();
  Var out = t.emplace(a.value().array().exp(), any_requires(a), nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, io](Tape& tp) {
    tp.add_grad(ia, tp.node(io).grad.cwiseProduct(tp.node(io).value));
  };
  return out;
}

Var clamp(const Var& a, double lo, double hi) {
  if (!(lo < hi)) {
    throw std::invalid_argument("clamp: lo must be < hi");
  }
  Tape& t = *a.tape();
  std::size_t ia = a.index();
  Var out = t.emplace(a.value().cwiseMax(lo).cwiseMin(hi), any_requires(a),
                      nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, io, lo, hi](Tape& tp) {
    const Eigen::ArrayXXd av = tp.node(ia).value.array();
    Eigen::MatrixXd mask = ((av >= lo) && (av <= hi)).cast<double>();
    tp.add_grad(ia, tp.node(io).grad.cwiseProduct(mask));
  };
  return out;
}

Var softmax_rows(const Var& a) {
  Tape& t = *a.tape();
  std::size_t ia = a.index();
  const Eigen::MatrixXd& av = a.value();
  Eigen::MatrixXd p(av.rows(), av.cols());
  for (long i = 0; i < av.rows(); ++i) {
    Eigen::ArrayXd row = av.row(i).array();
    row -= row.maxCoeff();
    Eigen::ArrayXd e = row.exp();
    p.row(i) = e / e.sum();
  }
  Var out = t.emplace(std::move(p), any_requires(a), nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, io](Tape& tp) {
    const Eigen::MatrixXd& pv = tp.node(io).value;
    const Eigen::MatrixXd& g = tp.node(io).grad;
    Eigen::MatrixXd gp = g.cwiseProduct(pv);
    Eigen::VectorXd dot = gp.rowwise().sum();
    tp.add_grad(ia, gp - pv.cwiseProduct(dot.replicate(1, pv.cols())));
  };
  return out;
}

Var sum(const Var& a) {
  Tape& t = *a.tape();
  std::size_t ia = a.index();
  Eigen::MatrixXd s(1, 1);
  s(0, 0) = a.value().sum();
  Var out = t.emplace(std::move(s), any_requires(a), nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, io](Tape& tp) {
    const Eigen::MatrixXd& av = tp.node(ia).value;
    tp.add_grad(ia, Eigen::MatrixXd::Constant(av.rows(), av.cols(),
                                              tp.node(io).grad(0, 0)));
  };
  return out;
}

Var mean(const Var& a) {
  double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var cols(const Var& a, long j, long n) {
  const Eigen::MatrixXd& av = a.value();
  if (j < 0 || n < 1 || j + n > av.cols()) {
    throw std::invalid_argument("cols: block out of range");
  }
  Tape& t = *a.tape();
  std::size_t ia = a.index();
  Var out = t.emplace(av.middleCols(j, n), any_requires(a), nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, io, j, n](Tape& tp) {
    const Eigen::MatrixXd& av = tp.node(ia).value;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(av.rows(), av.cols());
    g.middleCols(j, n) = tp.node(io).grad;
    tp.add_grad(ia, g);
  };
  return out;
}

Var rows(const Var& a, long i, long n) {
  const Eigen::MatrixXd& av = a.value();
  if (i < 0 || n < 1 || i + n > av.rows()) {
    throw std::invalid_argument("rows: block out of range");
  }
  Tape& t = *a.tape();
  std::size_t ia = a.index();
  Var out = t.emplace(av.middleRows(i, n), any_requires(a), nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, io, i, n](Tape& tp) {
    const Eigen::MatrixXd& av = tp.node(ia).value;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(av.rows(), av.cols());
    g.middleRows(i, n) = tp.node(io).grad;
    tp.add_grad(ia, g);
  };
  return out;
}

Var gather_cols(const Var& a, const std::vector<int>& idx) {
  const Eigen::MatrixXd& av = a.value();
  if (static_cast<long>(idx.size()) != av.rows()) {
    throw std::invalid_argument("gather_cols: index count != row count");
  }
  for (int j : idx) {
    if (j < 0 || j >= av.cols()) {
      throw std::invalid_argument("gather_cols: column index out of range");
    }
  }
  Tape& t = *a.tape();
  std::size_t ia = a.index();
  Eigen::MatrixXd r(av.rows(), 1);
  for (long i = 0; i < av.rows(); ++i) r(i, 0) = av(i, idx[i]);
  Var out = t.emplace(std::move(r), any_requires(a), nullptr);
  std::size_t io = out.index();
  t.node(io).back = [ia, io, idx](Tape& tp) {
    const Eigen::MatrixXd& av = tp.node(ia).value;
    const Eigen::MatrixXd& g = tp.node(io).grad;
    Eigen::MatrixXd ga = Eigen::MatrixXd::Zero(av.rows(), av.cols());
    for (long i = 0; i < av.rows(); ++i) ga(i, idx[i]) = g(i, 0);
    tp.add_grad(ia, ga);
  };
  return out;
}

Var broadcast_col(const Var& v, long n_cols) {
  const Eigen::MatrixXd& vv = v.value();
  if (vv.cols() != 1 || n_cols < 1) {
    throw std::invalid_argument("broadcast_col: expected Nx1 input, got " +
                                shape_str(vv));
  }
  Tape& t = *v.tape();
  std::size_t iv = v.index();
  Var out = t.emplace(vv.replicate(1, n_cols), any_requires(v), nullptr);
  std::size_t io = out.index();
  t.node(io).back = [iv, io](Tape& tp) {
    tp.add_grad(iv, tp.node(io).grad.rowwise().sum());
  };
  return out;
}

Eigen::MatrixXd finite_diff_grad(
    const std::function<double(const Eigen::MatrixXd&)>& f,
    const Eigen::MatrixXd& x, double h) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("finite_diff_grad: h must be positive");
  }
  Eigen::MatrixXd g(x.rows(), x.cols());
  Eigen::MatrixXd xp = x;
  for (long j = 0; j < x.cols(); ++j) {
    for (long i = 0; i < x.rows(); ++i) {
      double orig = xp(i, j);
      xp(i, j) = orig + h;
      double fp = f(xp);
      xp(i, j) = orig - h;
      double fm = f(xp);
      xp(i, j) = orig;
      g(i, j) = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

}  // namespace dada
