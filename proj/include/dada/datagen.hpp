#pragma once

// Deterministic synthetic domain-shift datasets: two-moons with a rotated
// target, multi-class Gaussian grids with a translated target, and label
// space restriction for partial and open set scenarios.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dada {

enum class Domain { source, target };
enum class Scenario { closed, partial, open };

struct LabeledInstance {
  Eigen::VectorXd x;
  std::optional<int> y;  // 1-based category index
  Domain domain = Domain::source;
};

struct DatasetPair {
  std::vector<LabeledInstance> source;
  std::vector<LabeledInstance> target;
  int K_source = 0;
  int K_target = 0;
  Scenario scenario = Scenario::closed;

  long feature_dim() const {
    return source.empty() ? 0 : source.front().x.size();
  }
};

/// Two-moons source (K=2) and a target drawn from the same distribution
/// rotated by rotation_deg about the distribution centroid.
DatasetPair make_two_moons(int n_per_domain, double rotation_deg,
                           double noise_sd, std::uint64_t seed);

/// K Gaussian clusters on a planar grid (step 3); target clusters are the
/// source ones translated by shift.
DatasetPair make_gaussian_grid(int K, int n_per_class,
                               const Eigen::Vector2d& shift, double spread,
                               std::uint64_t seed);

/// Keeps only the given target categories; scenario becomes partial.
DatasetPair restrict_target_labels(const DatasetPair& pair,
                                   const std::set<int>& target_labels);

/// Keeps only the given source categories; scenario becomes open. Source
/// labels are remapped to 1..m (sorted order of the subset); target
/// instances outside the subset are relabeled to the unknown index m+1.
/// known_to_unknown > 0 subsamples known target instances so that
/// known : unknown approximates the given ratio.
DatasetPair restrict_source_labels(const DatasetPair& pair,
                                   const std::set<int>& source_labels,
                                   double known_to_unknown = 0.0);

/// CSV header `x1,...,xd,label,domain`; label empty for unlabeled rows,
/// domain in {s,t}.
void save_csv(const DatasetPair& pair, const std::string& path);
DatasetPair load_csv(const std::string& path);

// Dense views used by the trainer and evaluator.
Eigen::MatrixXd features_matrix(const std::vector<LabeledInstance>& v);
std::vector<int> labels_vector(const std::vector<LabeledInstance>& v);

}  // namespace dada
