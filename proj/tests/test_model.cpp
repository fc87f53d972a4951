#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "dada/model.hpp"

using namespace dada;

TEST_CASE("zero-parameter network outputs uniform probabilities") {
  DadaNetwork net;
  net.K = 3;
  net.g_weights.push_back(Eigen::MatrixXd::Zero(2, 4));
  net.g_biases.push_back(Eigen::MatrixXd::Zero(1, 4));
  net.f_weight = Eigen::MatrixXd::Zero(4, 4);
  net.f_bias = Eigen::MatrixXd::Zero(1, 4);
  ProbOutput out = forward(net, Eigen::MatrixXd::Random(5, 2));
  for (long i = 0; i < 5; ++i) {
    for (long j = 0; j < 4; ++j) {
      CHECK(out.p(i, j) == doctest::Approx(0.25).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward probabilities normalize and satisfy the conditional identity") {
  DadaNetwork net = init_network({2, 8, 8}, 3, 1);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(17, 2) * 2.0;
  ProbOutput out = forward(net, X);
  for (long i = 0; i < X.rows(); ++i) {
    CHECK(std::abs(out.p.row(i).sum() - 1.0) < 1e-9);
    CHECK(std::abs(out.p_bar.row(i).sum() - 1.0) < 1e-9);
    for (int k = 0; k < net.K; ++k) {
      CHECK(std::abs(out.p_bar(i, k) * (1.0 - out.p(i, net.K)) -
                     out.p(i, k)) < 1e-9);
    }
  }
}

TEST_CASE("conditional vector of a hand-set distribution") {
  // p = (0.2, 0.3, 0.5) with K = 2: renormalize the first two entries.
  DadaNetwork net;
  net.K = 2;
  net.f_weight = Eigen::MatrixXd::Zero(1, 3);
  net.f_bias.resize(1, 3);
  net.f_bias << std::log(0.2), std::log(0.3), std::log(0.5);
  ProbOutput out = forward(net, Eigen::MatrixXd::Zero(1, 1));
  CHECK(out.p_bar(0, 0) == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(out.p_bar(0, 1) == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("forward rejects mismatched feature dimension") {
  DadaNetwork net = init_network({2, 4}, 2, 0);
  CHECK_THROWS_AS(forward(net, Eigen::MatrixXd::Zero(3, 5)),
                  std::invalid_argument);
}

TEST_CASE("domain prediction vector renormalizes one category-domain pair") {
  Eigen::VectorXd p(3);
  p << 0.2, 0.3, 0.5;
  Eigen::VectorXd v = domain_pred_vector(p, 0);
  CHECK(v(0) == doctest::Approx(0.2 / 0.7).epsilon(1e-9));
  CHECK(v(1) == 0.0);
  CHECK(v(2) == doctest::Approx(0.5 / 0.7).epsilon(1e-9));
  CHECK(v(0) + v(2) == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::VectorXd nodom(3);
  nodom << 0.6, 0.4, 0.0;
  CHECK(domain_pred_vector(nodom, 0)(0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(domain_pred_vector(p, 2), std::invalid_argument);
}

TEST_CASE("category prediction is an argmax with lowest-index ties") {
  Eigen::VectorXd a(2);
  a << 0.4, 0.6;
  CHECK(predict_category(a) == 1);
  Eigen::VectorXd b(2);
  b << 0.5, 0.5;
  CHECK(predict_category(b) == 0);
}

TEST_CASE("prediction is invariant to the domain probability") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01(0.0, 1.5);
  DadaNetwork net = init_network({2, 6}, 4, 2);
  Eigen::MatrixXd X(30, 2);
  for (long i = 0; i < X.size(); ++i) X(i) = n01(rng);
  ProbOutput out = forward(net, X);
  std::vector<int> preds = predict_categories(out);
  for (long i = 0; i < X.rows(); ++i) {
    int best = 0;
    for (int k = 1; k < net.K; ++k) {
      if (out.p(i, k) > out.p(i, best)) best = k;
    }
    CHECK(preds[i] == best);
  }
}

TEST_CASE("initialization is deterministic with zero biases and Glorot range") {
  DadaNetwork a = init_network({6, 6}, 5, 9);
  DadaNetwork b = init_network({6, 6}, 5, 9);
  CHECK(a.g_weights[0] == b.g_weights[0]);
  CHECK(a.f_weight == b.f_weight);
  CHECK(a.g_biases[0] == Eigen::MatrixXd::Zero(1, 6));
  CHECK(a.f_bias == Eigen::MatrixXd::Zero(1, 6));
  // fan_in = fan_out = 6 gives a bound of exactly 1.
  CHECK(a.g_weights[0].cwiseAbs().maxCoeff() <= 1.0);
  CHECK(a.g_weights[0].cwiseAbs().maxCoeff() > 0.5);  // not degenerate
}

TEST_CASE("checkpoints round trip") {
  DadaNetwork net = init_network({2, 16, 8}, 3, 31);
  std::string path = "/tmp/dada_test_ckpt.txt";
  save_checkpoint(net, path);
  DadaNetwork back = load_checkpoint(path);
  CHECK(back.K == net.K);
  REQUIRE(back.g_weights.size() == net.g_weights.size());
  for (std::size_t i = 0; i < net.g_weights.size(); ++i) {
    CHECK(back.g_weights[i] == net.g_weights[i]);
    CHECK(back.g_biases[i] == net.g_biases[i]);
  }
  CHECK(back.f_weight == net.f_weight);
  CHECK(back.f_bias == net.f_bias);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_checkpoint("/tmp/does_not_exist_dada.txt"),
                  std::runtime_error);
}

TEST_CASE("differentiable forward matches the plain forward") {
  DadaNetwork net = init_network({2, 8}, 3, 12);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(9, 2);
  ProbOutput plain = forward(net, X);
  Tape tape;
  ForwardGraph g = forward_graph(tape, net, X);
  CHECK((g.p.value() - plain.p).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(g.g_params.size() == 2);
  CHECK(g.f_params.size() == 2);
}
