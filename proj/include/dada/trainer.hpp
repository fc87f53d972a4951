#pragma once

// Optimization engine: source pre-training, the alternating
// classification / adversarial scheme, simultaneous two-group minimax
// updates (descent on F-parameters, ascent on G-parameters), and the
// DANN-lineage learning-rate and lambda schedules.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dada/datagen.hpp"
#include "dada/losses.hpp"
#include "dada/metrics.hpp"
#include "dada/model.hpp"

namespace dada {

struct TrainConfig {
  Objective objective = Objective::dada;
  double eta0 = 1e-4;
  double alpha = 10.0;
  double beta = 0.75;
  double gamma = 10.0;
  double q = 0.1;
  int batch_size = 64;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int T_cls = 1;
  int T_adv = 1;
  int N_alter = 1;
  int pretrain_epochs = 0;
  std::uint64_t seed = 0;
  LambdaPlacement lambda_placement = LambdaPlacement::joint;
  double condition_threshold = 0.5;
  bool keep_supervision = true;
  std::vector<long> hidden_dims = {64, 64};
  // Ramp coefficient for the category weight vector; negative means
  // "follow lambda_schedule".
  double weight_lambda = -1.0;

  void validate() const;
};

TrainConfig load_config(const std::string& path);
void save_config(const TrainConfig& cfg, const std::string& path);

/// eta_p = eta0 / (1 + alpha p)^beta
double lr_schedule(const TrainConfig& cfg, double p);
/// lambda_p = 2 / (1 + exp(-gamma p)) - 1
double lambda_schedule(const TrainConfig& cfg, double p);

/// Training-side view of a DatasetPair. Target labels are deliberately
/// absent: the trainer can only see target features.
struct TrainView {
  Eigen::MatrixXd source_X;
  std::vector<int> source_y;  // zero-based
  Eigen::MatrixXd target_X;
  Scenario scenario = Scenario::closed;
  int K = 0;  // network category count (includes unknown for open)
};
TrainView make_train_view(const DatasetPair& pair);

/// Called once per epoch with the current network; returns named metrics
/// (e.g. target accuracy computed against quarantined labels).
using EvalHook =
    std::function<std::vector<std::pair<std::string, double>>(
        const DadaNetwork&)>;

struct TrainState {
  DadaNetwork net;
  double progress = 0.0;  // normalized adversarial iteration count
  long step = 0;
  long adv_step = 0;
  long total_adv_steps = 0;
  std::mt19937_64 rng;
  std::vector<MetricsRecord> history;

  // SGD momentum buffers, laid out as forward_graph parameter order.
  std::vector<Eigen::MatrixXd> vel_g;
  std::vector<Eigen::MatrixXd> vel_f;
};

TrainState init_state(const TrainConfig& cfg, const TrainView& data);

/// Fraction of source instances with p_y <= threshold.
double condition_failure_rate(const DadaNetwork& net,
                              const Eigen::MatrixXd& source_X,
                              const std::vector<int>& source_y,
                              double threshold = 0.5);

/// One K-way cross-entropy epoch over the source data (used for both
/// pre-training and the classification phases of the alternation).
void classification_epoch(TrainState& state, const TrainConfig& cfg,
                          const TrainView& data);

/// Source pre-training: cfg.pretrain_epochs classification epochs.
void pretrain_source(TrainState& state, const TrainConfig& cfg,
                     const TrainView& data, const EvalHook& hook = nullptr);

/// One minimax update on a fixed pair of batches at the current progress.
/// weights is the category weight vector for dada_p, null otherwise.
/// Returns the loss components of the step.
std::map<std::string, double> adversarial_step(
    TrainState& state, const TrainConfig& cfg, const Eigen::MatrixXd& batch_sX,
    const std::vector<int>& batch_sy, const Eigen::MatrixXd& batch_tX,
    const Eigen::VectorXd* weights = nullptr);

/// Full run: pre-training then N_alter rounds of (T_cls classification
/// epochs, T_adv adversarial epochs), with per-epoch metrics.
TrainState train(const TrainConfig& cfg, const TrainView& data,
                 const EvalHook& hook = nullptr);

}  // namespace dada
