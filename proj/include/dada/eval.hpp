#pragma once

// Metrics: accuracy, per-class accuracy, open-set OS / OS* / unknown
// recall, average true-category probability, and seeded sweeps.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dada/datagen.hpp"
#include "dada/metrics.hpp"
#include "dada/model.hpp"
#include "dada/trainer.hpp"

namespace dada {

struct EvalReport {
  std::vector<double> per_class_acc;  // NaN for classes with no instances
  double overall = 0.0;
  Eigen::MatrixXi confusion;  // rows: true class, cols: predicted
};

/// Overall fraction correct. preds and labels are zero-based.
double accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

/// Class-conditional accuracies; classes absent from labels come back NaN
/// and are excluded from any mean.
std::vector<double> per_class_accuracy(const std::vector<int>& preds,
                                       const std::vector<int>& labels, int K);

/// Mean of a per-class vector ignoring NaN entries.
double per_class_mean(const std::vector<double>& per_class);

struct OpenSetMetrics {
  double os = 0.0;        // per-class mean over all K classes
  double os_star = 0.0;   // per-class mean over the K-1 known classes
  double unk_recall = 0.0;
  bool unknown_present = true;
};

/// Class K-1 (zero-based) is the unknown category.
OpenSetMetrics open_set_metrics(const std::vector<int>& preds,
                                const std::vector<int>& labels, int K);

EvalReport evaluate(const std::vector<int>& preds,
                    const std::vector<int>& labels, int K);

/// Mean p_bar on the true category over labeled target data.
double avg_true_class_prob(const DadaNetwork& net, const Eigen::MatrixXd& X,
                           const std::vector<int>& labels);

/// Standard per-epoch evaluation hook over quarantined target labels.
/// Emits acc_target and avg_true_prob, plus os/os_star/unk_recall when the
/// scenario is open.
EvalHook make_eval_hook(const Eigen::MatrixXd& target_X,
                        const std::vector<int>& target_y, Scenario scenario);

struct SweepRow {
  std::string knob;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
  int n_seeds = 0;
};

/// Runs every config over the shared seeds, evaluating the named metrics
/// from the final network. Deterministic row order: configs then metrics.
std::vector<SweepRow> sweep(
    const std::vector<std::pair<std::string, TrainConfig>>& configs,
    const std::function<DatasetPair(std::uint64_t seed)>& make_data,
    const std::vector<std::uint64_t>& seeds,
    const std::vector<std::string>& metrics);

std::string format_sweep_table(const std::vector<SweepRow>& rows);

}  // namespace dada
