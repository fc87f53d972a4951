#pragma once

// Every training objective: the classification-aware baseline, the
// discriminative source/target adversarial losses, entropy minimization,
// the partial-setting category weights, the open-set target loss, and the
// symmetric-confusion ablation. Losses are built on a tape from the batch
// probability matrix p (n rows, K+1 columns; column K is the domain
// neuron). Labels are zero-based here.

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dada/tensor.hpp"

namespace dada {

constexpr double kProbEps = 1e-12;

enum class Objective {
  dada,
  dada_p,
  dada_o,
  dann_ca,
  dada_dc,
  source_only,
  no_em,        // dada without the entropy term
  no_em_no_td,  // additionally without the target discriminative loss
};

enum class LambdaPlacement {
  joint,            // lambda multiplies (L_s + L_t) jointly
  adversarial_only  // lambda multiplies only the target adversarial term
};

Objective parse_objective(const std::string& name);
std::string objective_name(Objective o);

/// K category columns renormalized by 1/(1 - p_domain).
Var conditional_probs(const Var& p, int K);

/// -mean[(1-p_dom) log p_y + p_dom log(1-p_y)]
Var loss_source_dada(const Var& p, const std::vector<int>& y, int K);

/// Per-instance weights c_y applied to the source discriminative loss.
Var loss_source_dada_weighted(const Var& p, const std::vector<int>& y, int K,
                              const Eigen::VectorXd& c);

/// -mean sum_k p_bar_k log phat^k_domain
Var loss_target_F_dada(const Var& p, int K);

/// +mean sum_k p_bar_k log(1 - phat^k_domain)
Var loss_target_G_dada(const Var& p, int K);

/// mean H(p_bar)
Var loss_entropy(const Var& p, int K);

/// mean sum_k p_bar_k [0.5 log p_dom + 0.5 log(1-p_dom)]
Var loss_symmetric_dc(const Var& p, int K);

/// Open-set target loss: -mean[q log p_unknown + (1-q) log p_domain];
/// the unknown category is column K-1. Requires 0 < q < 0.5.
Var loss_target_F_openset(const Var& p, int K, double q);

/// -mean log p_y (baseline F-side source term)
Var loss_nll_p(const Var& p, const std::vector<int>& y, int K);

/// -mean log p_bar_y (K-way cross-entropy on the conditional vector)
Var loss_nll_pbar(const Var& p, const std::vector<int>& y, int K);

/// mean log p_domain over a target batch
Var mean_log_domain(const Var& p, int K);
/// mean log(1 - p_domain) over a target batch
Var mean_log_not_domain(const Var& p, int K);

/// Analytic gradients of the source discriminative loss for one instance
/// w.r.t. p_y and p_{K+1}.
struct SourceGradSigns {
  double d_py = 0.0;
  double d_pdom = 0.0;
  int sign_py = 0;    // in {-1, 0, +1}
  int sign_pdom = 0;
};
SourceGradSigns grad_signs_source(double p_y, double p_dom);

struct CategoryWeights {
  Eigen::VectorXd c_bar;  // mean of target p_bar, K entries
  Eigen::VectorXd c;      // lambda * c_bar/max(c_bar) + (1-lambda) * 1
};
CategoryWeights category_weights(const Eigen::MatrixXd& p_bar_batch,
                                 double lambda);

struct LossBundle {
  Var L_F;                 // minimized over F-parameters
  std::optional<Var> L_G;  // maximized over G-parameters
  std::map<std::string, double> components;
};

struct AssembleInputs {
  Var p_s;                  // source batch probabilities (may be invalid
                            //   for objectives without a source term)
  std::vector<int> y_s;     // zero-based source labels
  Var p_t;                  // target batch probabilities
  int K = 0;
  double lambda = 1.0;
  LambdaPlacement placement = LambdaPlacement::joint;
  double q = 0.1;                          // dada_o only
  const Eigen::VectorXd* weights = nullptr;  // dada_p only, K entries
};

LossBundle assemble(Objective objective, const AssembleInputs& in);

}  // namespace dada
