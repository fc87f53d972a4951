#include "dada/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dada {

namespace {

constexpr double kGridStep = 3.0;

Eigen::Vector2d rotate_about(const Eigen::Vector2d& p,
                             const Eigen::Vector2d& center, double rad) {
  Eigen::Matrix2d R;
  R << std::cos(rad), -std::sin(rad), std::sin(rad), std::cos(rad);
  return center + R * (p - center);
}

std::set<int> label_set(const std::vector<LabeledInstance>& v) {
  std::set<int> s;
  for (const auto& inst : v) {
    if (inst.y) s.insert(*inst.y);
  }
  return s;
}

}  // namespace

DatasetPair make_two_moons(int n_per_domain, double rotation_deg,
                           double noise_sd, std::uint64_t seed) {
  if (n_per_domain < 2) {
    throw std::invalid_argument("make_two_moons: n_per_domain must be >= 2");
  }
  if (rotation_deg < 0.0 || rotation_deg >= 360.0) {
    throw std::invalid_argument(
        "make_two_moons: rotation_deg must be in [0, 360)");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> noise(0.0, noise_sd);

  auto sample = [&](int label) {
    double t = angle(rng);
    Eigen::Vector2d p;
    if (label == 1) {
      p << std::cos(t), std::sin(t);
    } else {
      p << 1.0 - std::cos(t), 0.5 - std::sin(t);
    }
    p.x() += noise(rng);
    p.y() += noise(rng);
    return p;
  };

  // Centroid of the ideal (noise-free) mixture.
  const Eigen::Vector2d centroid(0.5, 0.25);
  const double rad = rotation_deg * std::numbers::pi / 180.0;

  DatasetPair pair;
  pair.K_source = 2;
  pair.K_target = 2;
  pair.scenario = Scenario::closed;
  for (int i = 0; i < n_per_domain; ++i) {
    int label = (i % 2) + 1;
    pair.source.push_back({sample(label), label, Domain::source});
  }
  for (int i = 0; i < n_per_domain; ++i) {
    int label = (i % 2) + 1;
    Eigen::Vector2d p = rotate_about(sample(label), centroid, rad);
    pair.target.push_back({p, label, Domain::target});
  }
  return pair;
}

DatasetPair make_gaussian_grid(int K, int n_per_class,
                               const Eigen::Vector2d& shift, double spread,
                               std::uint64_t seed) {
  if (K < 2) {
    throw std::invalid_argument("make_gaussian_grid: K must be >= 2");
  }
  if (n_per_class < 1) {
    throw std::invalid_argument("make_gaussian_grid: n_per_class must be >= 1");
  }
  int g = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(K))));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);

  auto center = [&](int k) {
    return Eigen::Vector2d(kGridStep * (k % g), kGridStep * (k / g));
  };
  auto sample = [&](int k) {
    Eigen::Vector2d c = center(k);
    c.x() += noise(rng);
    c.y() += noise(rng);
    return c;
  };

  DatasetPair pair;
  pair.K_source = K;
  pair.K_target = K;
  pair.scenario = Scenario::closed;
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < n_per_class; ++i) {
      pair.source.push_back({sample(k), k + 1, Domain::source});
    }
  }
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < n_per_class; ++i) {
      Eigen::Vector2d p = sample(k) + shift;
      pair.target.push_back({p, k + 1, Domain::target});
    }
  }
  return pair;
}

DatasetPair restrict_target_labels(const DatasetPair& pair,
                                   const std::set<int>& target_labels) {
  std::set<int> existing = label_set(pair.target);
  if (target_labels.empty()) {
    throw std::invalid_argument("restrict_target_labels: empty selection");
  }
  for (int l : target_labels) {
    if (!existing.count(l)) {
      throw std::invalid_argument(
          "restrict_target_labels: label " + std::to_string(l) +
          " not present in target");
    }
  }
  DatasetPair out;
  out.source = pair.source;
  out.K_source = pair.K_source;
  for (const auto& inst : pair.target) {
    if (inst.y && target_labels.count(*inst.y)) out.target.push_back(inst);
  }
  if (target_labels == existing) {
    out.scenario = pair.scenario;
    out.K_target = pair.K_target;
  } else {
    out.scenario = Scenario::partial;
    out.K_target = static_cast<int>(target_labels.size());
  }
  return out;
}

DatasetPair restrict_source_labels(const DatasetPair& pair,
                                   const std::set<int>& source_labels,
                                   double known_to_unknown) {
  std::set<int> existing = label_set(pair.source);
  if (source_labels.empty()) {
    throw std::invalid_argument("restrict_source_labels: empty selection");
  }
  for (int l : source_labels) {
    if (!existing.count(l)) {
      throw std::invalid_argument(
          "restrict_source_labels: label " + std::to_string(l) +
          " not present in source");
    }
  }
  if (source_labels == existing) {
    DatasetPair out = pair;
    return out;
  }

  // Remap kept labels to 1..m in sorted order; unknown becomes m+1.
  std::map<int, int> remap;
  int next = 1;
  for (int l : source_labels) remap[l] = next++;
  const int m = static_cast<int>(source_labels.size());
  const int unknown = m + 1;

  DatasetPair out;
  out.scenario = Scenario::open;
  out.K_source = m;
  out.K_target = unknown;
  for (const auto& inst : pair.source) {
    if (inst.y && remap.count(*inst.y)) {
      out.source.push_back({inst.x, remap[*inst.y], Domain::source});
    }
  }
  std::vector<LabeledInstance> known_t, unknown_t;
  for (const auto& inst : pair.target) {
    if (inst.y && remap.count(*inst.y)) {
      known_t.push_back({inst.x, remap[*inst.y], Domain::target});
    } else {
      LabeledInstance u{inst.x, std::nullopt, Domain::target};
      if (inst.y) u.y = unknown;  // unknown tag for evaluation only
      unknown_t.push_back(std::move(u));
    }
  }

  if (known_to_unknown > 0.0 && !unknown_t.empty()) {
    // Evenly strided subsample of the known side down to ratio * unknown.
    std::size_t want = static_cast<std::size_t>(
        std::llround(known_to_unknown * static_cast<double>(unknown_t.size())));
    if (want < known_t.size() && want >= 1) {
      std::vector<LabeledInstance> kept;
      double stride = static_cast<double>(known_t.size()) /
                      static_cast<double>(want);
      for (std::size_t i = 0; i < want; ++i) {
        kept.push_back(known_t[static_cast<std::size_t>(i * stride)]);
      }
      known_t = std::move(kept);
    }
  }
  out.target = std::move(known_t);
  out.target.insert(out.target.end(), unknown_t.begin(), unknown_t.end());
  return out;
}

void save_csv(const DatasetPair& pair, const std::string& path) {
  std::ofstream f(path);
  if (!f) {
    throw std::runtime_error("save_csv: cannot open " + path);
  }
  long d = pair.source.empty()
               ? (pair.target.empty() ? 0 : pair.target.front().x.size())
               : pair.feature_dim();
  f << std::setprecision(17);
  for (long j = 0; j < d; ++j) f << "x" << (j + 1) << ",";
  f << "label,domain\n";
  auto write = [&](const LabeledInstance& inst, char dom) {
    for (long j = 0; j < inst.x.size(); ++j) f << inst.x(j) << ",";
    if (inst.y) f << *inst.y;
    f << "," << dom << "\n";
  };
  for (const auto& inst : pair.source) write(inst, 's');
  for (const auto& inst : pair.target) write(inst, 't');
}

DatasetPair load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw std::runtime_error("load_csv: cannot open " + path);
  }
  std::string line;
  if (!std::getline(f, line) || line.empty()) {
    throw std::runtime_error("load_csv: no instances in " + path);
  }
  long d = static_cast<long>(std::count(line.begin(), line.end(), ',')) - 1;
  if (d < 1) {
    throw std::runtime_error("load_csv: malformed header in " + path);
  }
  DatasetPair pair;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    LabeledInstance inst;
    inst.x.resize(d);
    for (long j = 0; j < d; ++j) {
      if (!std::getline(ss, field, ',')) {
        throw std::runtime_error("load_csv: line " + std::to_string(lineno) +
                                 ": too few fields");
      }
      try {
        std::size_t pos = 0;
        inst.x(j) = std::stod(field, &pos);
        if (pos != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw std::runtime_error("load_csv: line " + std::to_string(lineno) +
                                 ": non-numeric feature '" + field + "'");
      }
    }
    if (!std::getline(ss, field, ',')) {
      throw std::runtime_error("load_csv: line " + std::to_string(lineno) +
                               ": missing label field");
    }
    if (!field.empty()) {
      try {
        inst.y = std::stoi(field);
      } catch (const std::exception&) {
        throw std::runtime_error("load_csv: line " + std::to_string(lineno) +
                                 ": bad label '" + field + "'");
      }
    }
    if (!std::getline(ss, field) || (field != "s" && field != "t")) {
      throw std::runtime_error("load_csv: line " + std::to_string(lineno) +
                               ": domain must be 's' or 't'");
    }
    if (field == "s") {
      inst.domain = Domain::source;
      pair.source.push_back(std::move(inst));
    } else {
      inst.domain = Domain::target;
      pair.target.push_back(std::move(inst));
    }
  }
  if (pair.source.empty() && pair.target.empty()) {
    throw std::runtime_error("load_csv: no instances in " + path);
  }

  // Reconstruct scenario bookkeeping from the label sets.
  std::set<int> src = label_set(pair.source);
  std::set<int> tgt = label_set(pair.target);
  pair.K_source = src.empty() ? 0 : *src.rbegin();
  if (tgt.empty() || tgt == src) {
    pair.scenario = Scenario::closed;
    pair.K_target = pair.K_source;
  } else if (*tgt.rbegin() > pair.K_source) {
    pair.scenario = Scenario::open;
    pair.K_target = pair.K_source + 1;
  } else {
    pair.scenario = Scenario::partial;
    pair.K_target = static_cast<int>(tgt.size());
  }
  return pair;
}

Eigen::MatrixXd features_matrix(const std::vector<LabeledInstance>& v) {
  if (v.empty()) return {};
  Eigen::MatrixXd m(static_cast<long>(v.size()), v.front().x.size());
  for (std::size_t i = 0; i < v.size(); ++i) m.row(static_cast<long>(i)) = v[i].x;
  return m;
}

std::vector<int> labels_vector(const std::vector<LabeledInstance>& v) {
  std::vector<int> out;
  out.reserve(v.size());
  for (const auto& inst : v) out.push_back(inst.y ? *inst.y : 0);
  return out;
}

}  // namespace dada
