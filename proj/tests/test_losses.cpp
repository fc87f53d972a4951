#include <doctest.h>

#include <cmath>
#include <random>

#include "dada/losses.hpp"
#include "dada/tensor.hpp"

using namespace dada;

namespace {

Eigen::MatrixXd rowvec(std::initializer_list<double> v) {
  Eigen::MatrixXd m(1, static_cast<long>(v.size()));
  long j = 0;
  for (double x : v) m(0, j++) = x;
  return m;
}

// Random logits matrix and a loss-of-softmax gradient check against the
// finite-difference oracle.
bool logits_grad_check(
    const std::function<Var(const Var& p)>& make_loss, long n, int K,
    std::mt19937_64& rng, double tol = 1e-4) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::MatrixXd z(n, K + 1);
  for (long i = 0; i < z.size(); ++i) z(i) = n01(rng);
  Tape tape;
  Var zv = tape.input(z, true);
  tape.backward(make_loss(softmax_rows(zv)));
  Eigen::MatrixXd numeric = finite_diff_grad(
      [&](const Eigen::MatrixXd& x) {
        Tape t2;
        return make_loss(softmax_rows(t2.input(x))).scalar();
      },
      z, 1e-5);
  double num = (zv.grad() - numeric).cwiseAbs().maxCoeff();
  double den = std::max(1e-7, numeric.cwiseAbs().maxCoeff());
  return num / den <= tol;
}

}  // namespace

TEST_CASE("source discriminative loss hand values") {
  {
    Tape t;
    Var p = t.input(rowvec({0.7, 0.1, 0.2}));
    // -[(1-0.2) ln 0.7 + 0.2 ln 0.3]
    CHECK(loss_source_dada(p, {0}, 2).scalar() ==
          doctest::Approx(0.5261345160161731).epsilon(1e-9));
  }
  {
    Tape t;
    Var p = t.input(rowvec({1.0 - 1e-13, 1e-13, 0.0}));
    CHECK(loss_source_dada(p, {0}, 2).scalar() ==
          doctest::Approx(0.0).epsilon(1e-9));
  }
  {
    Tape t;
    Var p = t.input(rowvec({0.5, 0.0, 0.5}));
    CHECK(loss_source_dada(p, {0}, 2).scalar() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  {
    Tape t;
    Var p = t.input(rowvec({0.7, 0.1, 0.2}));
    CHECK_THROWS_AS(loss_source_dada(p, {2}, 2), std::invalid_argument);
  }
}

TEST_CASE("gradient signs of the source discriminative loss") {
  SourceGradSigns mid = grad_signs_source(0.5, 0.3);
  CHECK(mid.sign_py <= 0);
  CHECK(grad_signs_source(0.7, 0.2).sign_pdom == 1);
  CHECK(grad_signs_source(0.3, 0.2).sign_pdom == -1);
  CHECK(grad_signs_source(0.7, 0.2).d_pdom ==
        doctest::Approx(std::log(0.7 / 0.3)).epsilon(1e-12));
  CHECK_THROWS_AS(grad_signs_source(0.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(grad_signs_source(0.7, 0.4), std::invalid_argument);
}

TEST_CASE("grad sign property over the simplex") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  for (int i = 0; i < 10000; ++i) {
    double a = u(rng), b = u(rng), c = u(rng);
    double s = a + b + c;
    double p_y = a / s, p_dom = b / s;
    SourceGradSigns g = grad_signs_source(p_y, p_dom);
    CHECK(g.d_py <= 0.0);
    if (std::abs(p_y - 0.5) > 1e-9) {
      CHECK(g.sign_pdom == (p_y > 0.5 ? 1 : -1));
    }
  }
}

TEST_CASE("target F loss hand values") {
  {
    Tape t;
    Var p = t.input(rowvec({0.2, 0.3, 0.5}));
    // p_bar=(0.4,0.6); phat_dom=(0.5/0.7, 0.5/0.8)
    CHECK(loss_target_F_dada(p, 2).scalar() ==
          doctest::Approx(0.4165910721959265).epsilon(1e-9));
  }
  {
    Tape t;
    Var p = t.input(rowvec({0.5, 0.0, 0.5}));
    CHECK(loss_target_F_dada(p, 2).scalar() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-9));
  }
  {
    Tape t;
    Var p = t.input(rowvec({1e-13, 1e-13, 1.0 - 2e-13}));
    CHECK(loss_target_F_dada(p, 2).scalar() ==
          doctest::Approx(0.0).epsilon(1e-6));
  }
}

TEST_CASE("target G loss hand values") {
  {
    Tape t;
    Var p = t.input(rowvec({0.2, 0.3, 0.5}));
    // 0.4 ln(0.2/0.7) + 0.6 ln(0.3/0.8)
    CHECK(loss_target_G_dada(p, 2).scalar() ==
          doctest::Approx(-1.0896027392051829).epsilon(1e-9));
  }
  {
    Tape t;
    Var p = t.input(rowvec({0.6, 0.4, 0.0}));
    CHECK(loss_target_G_dada(p, 2).scalar() ==
          doctest::Approx(0.0).epsilon(1e-6));
  }
  {
    // The per-category factor log(p_k / (p_k + p_dom)) is strictly
    // increasing in p_k at interior points, so maximizing over G pushes
    // category mass up against the domain neuron.
    for (double pdom : {0.2, 0.5, 0.8}) {
      Eigen::MatrixXd pk(1, 1);
      pk << 0.15;
      Eigen::MatrixXd g = finite_diff_grad(
          [&](const Eigen::MatrixXd& x) {
            return std::log(x(0) / (x(0) + pdom));
          },
          pk, 1e-7);
      CHECK(g(0, 0) > 0.0);
    }
  }
}

TEST_CASE("entropy of the conditional vector") {
  {
    Tape t;
    Var p = t.input(rowvec({0.2, 0.2, 0.2, 0.2, 0.2}));
    CHECK(loss_entropy(p, 4).scalar() ==
          doctest::Approx(std::log(4.0)).epsilon(1e-9));
  }
  {
    Tape t;
    Var p = t.input(rowvec({0.8, 0.0, 0.2}));  // one-hot conditional
    CHECK(loss_entropy(p, 2).scalar() == doctest::Approx(0.0).epsilon(1e-9));
  }
  {
    Tape t;
    Var p = t.input(rowvec({0.375, 0.125, 0.5}));  // p_bar = (0.75, 0.25)
    CHECK(loss_entropy(p, 2).scalar() ==
          doctest::Approx(0.5623351446188084).epsilon(1e-9));
  }
}

TEST_CASE("classification-aware baseline bundle") {
  Tape t;
  Var p_s = t.input(rowvec({0.7, 0.1, 0.2}));
  Var p_t = t.input(rowvec({0.25, 0.25, 0.5}));
  AssembleInputs in;
  in.p_s = p_s;
  in.y_s = {0};
  in.p_t = p_t;
  in.K = 2;
  in.lambda = 1.0;
  LossBundle b = assemble(Objective::dann_ca, in);
  // F side: -ln p_y^s - ln p_dom^t
  CHECK(b.L_F.scalar() ==
        doctest::Approx(-std::log(0.7) - std::log(0.5)).epsilon(1e-9));
  CHECK(b.components.at("L_s") ==
        doctest::Approx(-std::log(0.7)).epsilon(1e-9));
}

TEST_CASE("symmetric confusion loss peaks at a half-half domain call") {
  auto value = [](double pdom) {
    Tape t;
    Var p = t.input(rowvec({(1.0 - pdom) * 0.5, (1.0 - pdom) * 0.5, pdom}));
    return loss_symmetric_dc(p, 2).scalar();
  };
  CHECK(value(0.5) == doctest::Approx(-std::log(2.0)).epsilon(1e-9));
  CHECK(value(0.9) < value(0.5));
  CHECK(value(0.2) < value(0.5));
  // Independent of how the conditional mass is distributed.
  Tape t;
  Var a = t.input(rowvec({0.1, 0.4, 0.5}));
  Var b = t.input(rowvec({0.4, 0.1, 0.5}));
  CHECK(loss_symmetric_dc(a, 2).scalar() ==
        doctest::Approx(loss_symmetric_dc(b, 2).scalar()).epsilon(1e-12));
}

TEST_CASE("category weights") {
  {
    Eigen::MatrixXd pb(1, 3);
    pb << 0.2, 0.3, 0.5;
    CategoryWeights w = category_weights(pb, 0.0);
    CHECK(w.c == Eigen::VectorXd::Ones(3));
  }
  {
    Eigen::MatrixXd pb(2, 3);
    pb << 1.0, 0.0, 0.0, 1.0, 0.0, 0.0;
    CategoryWeights w = category_weights(pb, 1.0);
    CHECK(w.c(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.c(1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(w.c(2) == doctest::Approx(0.0).epsilon(1e-12));
  }
  {
    Eigen::MatrixXd pb(1, 2);
    pb << 0.2, 0.4;
    CategoryWeights w = category_weights(pb, 0.5);
    CHECK(w.c(0) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(w.c(1) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(category_weights(Eigen::MatrixXd(), 0.5),
                  std::invalid_argument);
}

TEST_CASE("weighted source loss") {
  Tape t;
  Var p = t.input(rowvec({0.7, 0.1, 0.2}));
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(2);
  CHECK(loss_source_dada_weighted(p, {0}, 2, ones).scalar() ==
        loss_source_dada(p, {0}, 2).scalar());
  Eigen::VectorXd half(2);
  half << 0.5, 1.0;
  CHECK(loss_source_dada_weighted(p, {0}, 2, half).scalar() ==
        doctest::Approx(0.5 * 0.5261345160161731).epsilon(1e-9));
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  CHECK(loss_source_dada_weighted(p, {0}, 2, zero).scalar() ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("open-set target loss") {
  {
    Tape t;
    // K = 2 known-plus-unknown categories: column 1 unknown, column 2 domain.
    Var p = t.input(rowvec({0.1, 0.3, 0.6}));
    CHECK(loss_target_F_openset(p, 2, 0.1).scalar() ==
          doctest::Approx(0.5801403418219852).epsilon(1e-9));
  }
  {
    // Small q approaches the plain domain cross-entropy within O(q).
    Tape t;
    Var p = t.input(rowvec({0.1, 0.3, 0.6}));
    double q = 1e-6;
    double limit = -std::log(0.6);
    CHECK(std::abs(loss_target_F_openset(p, 2, q).scalar() - limit) <
          50.0 * q);
  }
  {
    Tape t;
    Var p = t.input(rowvec({0.1, 0.3, 0.6}));
    CHECK_THROWS_AS(loss_target_F_openset(p, 2, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(loss_target_F_openset(p, 2, 0.5), std::invalid_argument);
  }
  {
    // Grid search: the constrained minimizer puts p_K/p_dom near q/(1-q).
    double q = 0.1;
    double best = 1e18, best_ratio = 0.0;
    for (int i = 1; i < 200; ++i) {
      double pk = i / 200.0;
      double pdom = 1.0 - pk;  // boundary of the constraint is optimal
      double v = -(q * std::log(pk) + (1.0 - q) * std::log(pdom));
      if (v < best) {
        best = v;
        best_ratio = pk / pdom;
      }
    }
    CHECK(best_ratio == doctest::Approx(q / (1.0 - q)).epsilon(0.05));
  }
}

TEST_CASE("assemble covers every objective") {
  Tape t;
  Var p_s = t.input(rowvec({0.7, 0.1, 0.2}));
  Var p_t = t.input(rowvec({0.25, 0.25, 0.5}));
  AssembleInputs in;
  in.p_s = p_s;
  in.y_s = {0};
  in.p_t = p_t;
  in.K = 2;
  in.lambda = 0.5;

  SUBCASE("source_only has no adversarial side") {
    LossBundle b = assemble(Objective::source_only, in);
    CHECK_FALSE(b.L_G.has_value());
    CHECK(b.components.count("L_em") == 0);
  }
  SUBCASE("no_em drops the entropy component") {
    LossBundle b = assemble(Objective::no_em, in);
    CHECK(b.components.count("L_em") == 0);
    CHECK(b.components.count("L_t_F") == 1);
  }
  SUBCASE("no_em_no_td additionally drops the target term") {
    LossBundle b = assemble(Objective::no_em_no_td, in);
    CHECK(b.components.count("L_t_F") == 0);
  }
  SUBCASE("dada at lambda 0 reduces to the entropy term") {
    in.lambda = 0.0;
    LossBundle b = assemble(Objective::dada, in);
    double em = b.components.at("L_em");
    CHECK(b.L_F.scalar() == doctest::Approx(-em).epsilon(1e-12));
    CHECK(b.L_G->scalar() == doctest::Approx(-em).epsilon(1e-12));
  }
  SUBCASE("dada components recombine exactly") {
    LossBundle b = assemble(Objective::dada, in);
    const auto& c = b.components;
    CHECK(b.L_F.scalar() ==
          doctest::Approx(0.5 * (c.at("L_s") + c.at("L_t_F")) - c.at("L_em"))
              .epsilon(1e-12));
    CHECK(b.L_G->scalar() ==
          doctest::Approx(0.5 * (c.at("L_s") + c.at("L_t_G")) - c.at("L_em"))
              .epsilon(1e-12));
  }
  SUBCASE("dada_p flips the entropy sign on the F side") {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(2);
    in.weights = &w;
    LossBundle b = assemble(Objective::dada_p, in);
    const auto& c = b.components;
    CHECK(b.L_F.scalar() ==
          doctest::Approx(0.5 * (c.at("L_s") + c.at("L_t_F")) + c.at("L_em"))
              .epsilon(1e-12));
    CHECK(b.L_G->scalar() ==
          doctest::Approx(0.5 * (c.at("L_s") + c.at("L_t_G")) - c.at("L_em"))
              .epsilon(1e-12));
  }
  SUBCASE("dada_p requires weights") {
    CHECK_THROWS_AS(assemble(Objective::dada_p, in), std::invalid_argument);
  }
  SUBCASE("dada_o uses the open-set target loss on the F side") {
    in.q = 0.1;
    LossBundle b = assemble(Objective::dada_o, in);
    Tape t2;
    Var p2 = t2.input(rowvec({0.25, 0.25, 0.5}));
    CHECK(b.components.at("L_t_F") ==
          doctest::Approx(loss_target_F_openset(p2, 2, 0.1).scalar())
              .epsilon(1e-12));
  }
}

TEST_CASE("gradients of every loss match the finite-difference oracle") {
  std::mt19937_64 rng(314);
  std::uniform_int_distribution<int> pick_k(3, 6);
  for (int trial = 0; trial < 100; ++trial) {
    int K = pick_k(rng);
    std::vector<int> y(3);
    std::uniform_int_distribution<int> lab(0, K - 1);
    for (auto& l : y) l = lab(rng);
    CHECK(logits_grad_check(
        [&](const Var& p) { return loss_source_dada(p, y, K); }, 3, K, rng));
    CHECK(logits_grad_check(
        [&](const Var& p) { return loss_target_F_dada(p, K); }, 3, K, rng));
    CHECK(logits_grad_check(
        [&](const Var& p) { return loss_target_G_dada(p, K); }, 3, K, rng));
    CHECK(logits_grad_check(
        [&](const Var& p) { return loss_entropy(p, K); }, 3, K, rng));
    CHECK(logits_grad_check(
        [&](const Var& p) { return loss_symmetric_dc(p, K); }, 3, K, rng));
    CHECK(logits_grad_check(
        [&](const Var& p) { return loss_target_F_openset(p, K, 0.1); }, 3, K,
        rng));
    CHECK(logits_grad_check(
        [&](const Var& p) { return loss_nll_p(p, y, K); }, 3, K, rng));
    CHECK(logits_grad_check(
        [&](const Var& p) { return loss_nll_pbar(p, y, K); }, 3, K, rng));
  }
}

TEST_CASE("objective names round trip") {
  for (Objective o :
       {Objective::dada, Objective::dada_p, Objective::dada_o,
        Objective::dann_ca, Objective::dada_dc, Objective::source_only,
        Objective::no_em, Objective::no_em_no_td}) {
    CHECK(parse_objective(objective_name(o)) == o);
  }
  CHECK_THROWS_AS(parse_objective("bogus"), std::invalid_argument);
}
