#include "dada/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace dada {

namespace {

void check_labels(const std::vector<int>& y, long n, int K) {
  if (static_cast<long>(y.size()) != n) {
    throw std::invalid_argument("label count does not match batch size");
  }
  for (int l : y) {
    if (l < 0 || l >= K) {
      throw std::invalid_argument("label " + std::to_string(l) +
                                  " out of range [0, " + std::to_string(K) +
                                  ")");
    }
  }
}

Var clamped_log(const Var& v) { return log(clamp(v, kProbEps, 1.0)); }

Var domain_col(const Var& p, int K) { return cols(p, K, 1); }

}  // namespace

Objective parse_objective(const std::string& name) {
  if (name == "dada") return Objective::dada;
  if (name == "dada_p") return Objective::dada_p;
  if (name == "dada_o") return Objective::dada_o;
  if (name == "dann_ca") return Objective::dann_ca;
  if (name == "dada_dc") return Objective::dada_dc;
  if (name == "source_only") return Objective::source_only;
  if (name == "no_em") return Objective::no_em;
  if (name == "no_em_no_td") return Objective::no_em_no_td;
  throw std::invalid_argument("unknown objective '" + name + "'");
}

std::string objective_name(Objective o) {
  switch (o) {
    case Objective::dada: return "dada";
    case Objective::dada_p: return "dada_p";
    case Objective::dada_o: return "dada_o";
    case Objective::dann_ca: return "dann_ca";
    case Objective::dada_dc: return "dada_dc";
    case Objective::source_only: return "source_only";
    case Objective::no_em: return "no_em";
    case Objective::no_em_no_td: return "no_em_no_td";
  }
  return "unknown";
}

Var conditional_probs(const Var& p, int K) {
  Var cats = cols(p, 0, K);
  Var denom = clamp(add_const(neg(domain_col(p, K)), 1.0), kProbEps, 1.0);
  return div(cats, broadcast_col(denom, K));
}

Var loss_source_dada(const Var& p, const std::vector<int>& y, int K) {
  check_labels(y, p.rows(), K);
  Var py = gather_cols(p, y);
  Var pdom = domain_col(p, K);
  Var not_dom = add_const(neg(pdom), 1.0);
  Var not_py = add_const(neg(py), 1.0);
  Var term = add(mul(not_dom, clamped_log(py)), mul(pdom, clamped_log(not_py)));
  return neg(mean(term));
}

Var loss_source_dada_weighted(const Var& p, const std::vector<int>& y, int K,
                              const Eigen::VectorXd& c) {
  check_labels(y, p.rows(), K);
  if (c.size() != K) {
    throw std::invalid_argument("loss_source_dada_weighted: weight vector "
                                "must have K entries");
  }
  Eigen::MatrixXd w(p.rows(), 1);
  for (long i = 0; i < p.rows(); ++i) w(i, 0) = c(y[i]);
  Var wv = p.tape()->input(w, false);

  Var py = gather_cols(p, y);
  Var pdom = domain_col(p, K);
  Var not_dom = add_const(neg(pdom), 1.0);
  Var not_py = add_const(neg(py), 1.0);
  Var term = add(mul(not_dom, clamped_log(py)), mul(pdom, clamped_log(not_py)));
  return neg(mean(mul(wv, term)));
}

namespace {

// phat^k_{K+1} = p_dom / (p_k + p_dom), column k of the returned matrix.
Var domain_share(const Var& p, int K) {
  Var cats = cols(p, 0, K);
  Var pdom_b = broadcast_col(domain_col(p, K), K);
  Var denom = clamp(add(cats, pdom_b), kProbEps, 2.0);
  return div(pdom_b, denom);
}

// 1 - phat^k_{K+1} = p_k / (p_k + p_dom).
Var category_share(const Var& p, int K) {
  Var cats = cols(p, 0, K);
  Var pdom_b = broadcast_col(domain_col(p, K), K);
  Var denom = clamp(add(cats, pdom_b), kProbEps, 2.0);
  return div(cats, denom);
}

}  // namespace

Var loss_target_F_dada(const Var& p, int K) {
  Var inner = mul(conditional_probs(p, K), clamped_log(domain_share(p, K)));
  return scale(sum(inner), -1.0 / static_cast<double>(p.rows()));
}

Var loss_target_G_dada(const Var& p, int K) {
  Var inner = mul(conditional_probs(p, K), clamped_log(category_share(p, K)));
  return scale(sum(inner), 1.0 / static_cast<double>(p.rows()));
}

Var loss_entropy(const Var& p, int K) {
  Var pbar = conditional_probs(p, K);
  Var inner = mul(pbar, clamped_log(pbar));
  return scale(sum(inner), -1.0 / static_cast<double>(p.rows()));
}

Var loss_symmetric_dc(const Var& p, int K) {
  Var pdom = domain_col(p, K);
  Var bracket = add(scale(clamped_log(pdom), 0.5),
                    scale(clamped_log(add_const(neg(pdom), 1.0)), 0.5));
  Var inner = mul(conditional_probs(p, K), broadcast_col(bracket, K));
  return scale(sum(inner), 1.0 / static_cast<double>(p.rows()));
}

Var loss_target_F_openset(const Var& p, int K, double q) {
  if (!(q > 0.0 && q < 0.5)) {
    throw std::invalid_argument("loss_target_F_openset: q must be in (0, 0.5)");
  }
  if (K < 2) {
    throw std::invalid_argument("loss_target_F_openset: needs K >= 2 "
                                "(unknown category is column K-1)");
  }
  Var punk = cols(p, K - 1, 1);
  Var pdom = domain_col(p, K);
  Var term = add(scale(clamped_log(punk), q),
                 scale(clamped_log(pdom), 1.0 - q));
  return neg(mean(term));
}

Var loss_nll_p(const Var& p, const std::vector<int>& y, int K) {
  check_labels(y, p.rows(), K);
  return neg(mean(clamped_log(gather_cols(p, y))));
}

Var loss_nll_pbar(const Var& p, const std::vector<int>& y, int K) {
  check_labels(y, p.rows(), K);
  return neg(mean(clamped_log(gather_cols(conditional_probs(p, K), y))));
}

Var mean_log_domain(const Var& p, int K) {
  return mean(clamped_log(domain_col(p, K)));
}

Var mean_log_not_domain(const Var& p, int K) {
  return mean(clamped_log(add_const(neg(domain_col(p, K)), 1.0)));
}

SourceGradSigns grad_signs_source(double p_y, double p_dom) {
  if (!(p_y > 0.0 && p_y < 1.0 && p_dom > 0.0 && p_dom < 1.0) ||
      p_y + p_dom > 1.0) {
    throw std::invalid_argument(
        "grad_signs_source: (p_y, p_dom) must lie in the open simplex");
  }
  SourceGradSigns s;
  s.d_py = (p_y * p_dom - (1.0 - p_y) * (1.0 - p_dom)) / (p_y * (1.0 - p_y));
  s.d_pdom = std::log(p_y / (1.0 - p_y));
  s.sign_py = (s.d_py > 0.0) - (s.d_py < 0.0);
  s.sign_pdom = (s.d_pdom > 0.0) - (s.d_pdom < 0.0);
  return s;
}

CategoryWeights category_weights(const Eigen::MatrixXd& p_bar_batch,
                                 double lambda) {
  if (p_bar_batch.rows() == 0) {
    throw std::invalid_argument("category_weights: empty batch");
  }
  if (lambda < 0.0 || lambda > 1.0) {
    throw std::invalid_argument("category_weights: lambda must be in [0, 1]");
  }
  CategoryWeights w;
  w.c_bar = p_bar_batch.colwise().mean();
  double mx = w.c_bar.maxCoeff();
  Eigen::VectorXd normalized =
      mx > 0.0 ? Eigen::VectorXd(w.c_bar / mx)
               : Eigen::VectorXd::Ones(w.c_bar.size());
  w.c = lambda * normalized +
        (1.0 - lambda) * Eigen::VectorXd::Ones(w.c_bar.size());
  return w;
}

LossBundle assemble(Objective objective, const AssembleInputs& in) {
  const int K = in.K;
  LossBundle out;

  auto record = [&out](const std::string& name, const Var& v) {
    out.components[name] = v.scalar();
  };

  if (objective == Objective::source_only) {
    if (!in.p_s.valid()) {
      throw std::invalid_argument("assemble: source_only needs a source batch");
    }
    out.L_F = loss_nll_pbar(in.p_s, in.y_s, K);
    record("L_F", out.L_F);
    return out;
  }

  if (!in.p_t.valid()) {
    throw std::invalid_argument("assemble: objective '" +
                                objective_name(objective) +
                                "' needs a target batch");
  }

  if (objective == Objective::dann_ca) {
    if (!in.p_s.valid()) {
      throw std::invalid_argument("assemble: dann_ca needs a source batch");
    }
    Var src_f = loss_nll_p(in.p_s, in.y_s, K);
    Var tgt_f = neg(mean_log_domain(in.p_t, K));
    out.L_F = add(src_f, tgt_f);
    Var src_g = neg(loss_nll_pbar(in.p_s, in.y_s, K));  // mean log p_bar_y
    Var tgt_g = scale(mean_log_not_domain(in.p_t, K), in.lambda);
    out.L_G = add(src_g, tgt_g);
    record("L_s", src_f);
    record("L_F", out.L_F);
    record("L_G", *out.L_G);
    return out;
  }

  if (!in.p_s.valid()) {
    throw std::invalid_argument("assemble: objective '" +
                                objective_name(objective) +
                                "' needs a source batch");
  }

  Var L_s;
  if (objective == Objective::dada_p) {
    if (in.weights == nullptr) {
      throw std::invalid_argument("assemble: dada_p needs category weights");
    }
    L_s = loss_source_dada_weighted(in.p_s, in.y_s, K, *in.weights);
  } else {
    L_s = loss_source_dada(in.p_s, in.y_s, K);
  }
  record("L_s", L_s);

  const bool with_td = objective != Objective::no_em_no_td;
  const bool with_em = objective != Objective::no_em && with_td;

  Var L_t_F, L_t_G;
  if (with_td) {
    if (objective == Objective::dada_o) {
      // q = 0 degenerates to the plain domain cross-entropy (no leakage
      // onto the unknown category).
      L_t_F = in.q == 0.0 ? neg(mean_log_domain(in.p_t, K))
                          : loss_target_F_openset(in.p_t, K, in.q);
    } else {
      L_t_F = loss_target_F_dada(in.p_t, K);
    }
    L_t_G = objective == Objective::dada_dc ? loss_symmetric_dc(in.p_t, K)
                                            : loss_target_G_dada(in.p_t, K);
    record("L_t_F", L_t_F);
    record("L_t_G", L_t_G);
  }

  Var L_em;
  if (with_em) {
    L_em = loss_entropy(in.p_t, K);
    record("L_em", L_em);
  }

  auto combine = [&](const Var& adv, bool em_sign_positive) {
    Var core;
    if (in.placement == LambdaPlacement::joint) {
      core = scale(add(L_s, adv), in.lambda);
    } else {
      core = add(L_s, scale(adv, in.lambda));
    }
    if (!with_em) return core;
    return em_sign_positive ? add(core, L_em) : sub(core, L_em);
  };

  if (with_td) {
    // dada_p minimizes the entropy term over F; the others maximize it.
    bool em_plus_for_F = objective == Objective::dada_p;
    out.L_F = combine(L_t_F, em_plus_for_F);
    out.L_G = combine(L_t_G, false);
  } else {
    Var core = in.placement == LambdaPlacement::joint ? scale(L_s, in.lambda)
                                                      : L_s;
    out.L_F = core;
    out.L_G = core;
  }
  record("L_F", out.L_F);
  record("L_G", *out.L_G);
  return out;
}

}  // namespace dada
