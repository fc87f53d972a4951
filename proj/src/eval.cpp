#include "dada/eval.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dada {

std::string phase_name(Phase p) {
  switch (p) {
    case Phase::pretrain: return "pretrain";
    case Phase::cls: return "cls";
    case Phase::adv: return "adv";
    case Phase::eval: return "eval";
  }
  return "unknown";
}

Phase parse_phase(const std::string& s) {
  if (s == "pretrain") return Phase::pretrain;
  if (s == "cls") return Phase::cls;
  if (s == "adv") return Phase::adv;
  if (s == "eval") return Phase::eval;
  throw std::invalid_argument("unknown phase '" + s + "'");
}

void save_metrics(const std::vector<MetricsRecord>& records,
                  const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_metrics: cannot open " + path);
  f << std::setprecision(17);
  for (const auto& r : records) {
    f << r.step << "," << r.epoch << "," << phase_name(r.phase) << ","
      << r.name << "," << r.value << "\n";
  }
}

std::vector<MetricsRecord> load_metrics(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_metrics: cannot open " + path);
  std::vector<MetricsRecord> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string step, epoch, phase, name, value;
    if (!std::getline(ss, step, ',') || !std::getline(ss, epoch, ',') ||
        !std::getline(ss, phase, ',') || !std::getline(ss, name, ',') ||
        !std::getline(ss, value)) {
      throw std::runtime_error("load_metrics: malformed line: " + line);
    }
    out.push_back({std::stol(step), std::stoi(epoch), parse_phase(phase), name,
                   std::stod(value)});
  }
  return out;
}

double accuracy(const std::vector<int>& preds,
                const std::vector<int>& labels) {
  if (preds.empty() || preds.size() != labels.size()) {
    throw std::invalid_argument("accuracy: empty or mismatched inputs");
  }
  long correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

std::vector<double> per_class_accuracy(const std::vector<int>& preds,
                                       const std::vector<int>& labels,
                                       int K) {
  if (preds.empty() || preds.size() != labels.size()) {
    throw std::invalid_argument("per_class_accuracy: empty or mismatched "
                                "inputs");
  }
  std::vector<long> total(K, 0), correct(K, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    int l = labels[i];
    if (l < 0 || l >= K) {
      throw std::invalid_argument("per_class_accuracy: label out of range");
    }
    ++total[l];
    if (preds[i] == l) ++correct[l];
  }
  std::vector<double> out(K);
  for (int k = 0; k < K; ++k) {
    out[k] = total[k] == 0
                 ? std::numeric_limits<double>::quiet_NaN()
                 : static_cast<double>(correct[k]) /
                       static_cast<double>(total[k]);
  }
  return out;
}

double per_class_mean(const std::vector<double>& per_class) {
  double sum = 0.0;
  int n = 0;
  for (double v : per_class) {
    if (!std::isnan(v)) {
      sum += v;
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / n;
}

OpenSetMetrics open_set_metrics(const std::vector<int>& preds,
                                const std::vector<int>& labels, int K) {
  if (K < 2) {
    throw std::invalid_argument("open_set_metrics: K must be >= 2");
  }
  std::vector<double> pc = per_class_accuracy(preds, labels, K);
  OpenSetMetrics m;
  std::vector<double> known(pc.begin(), pc.end() - 1);
  m.os_star = per_class_mean(known);
  if (std::isnan(pc.back())) {
    // No unknown instances: OS falls back to OS*.
    m.unknown_present = false;
    m.os = m.os_star;
    m.unk_recall = std::numeric_limits<double>::quiet_NaN();
  } else {
    m.unk_recall = pc.back();
    m.os = per_class_mean(pc);
  }
  return m;
}

EvalReport evaluate(const std::vector<int>& preds,
                    const std::vector<int>& labels, int K) {
  EvalReport r;
  r.per_class_acc = per_class_accuracy(preds, labels, K);
  r.overall = accuracy(preds, labels);
  r.confusion = Eigen::MatrixXi::Zero(K, K);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    r.confusion(labels[i], preds[i]) += 1;
  }
  return r;
}

double avg_true_class_prob(const DadaNetwork& net, const Eigen::MatrixXd& X,
                           const std::vector<int>& labels) {
  if (X.rows() == 0 || static_cast<long>(labels.size()) != X.rows()) {
    throw std::invalid_argument("avg_true_class_prob: empty or mismatched "
                                "inputs");
  }
  ProbOutput out = forward(net, X);
  double sum = 0.0;
  for (long i = 0; i < X.rows(); ++i) {
    sum += out.p_bar(i, labels[i]);
  }
  return sum / static_cast<double>(X.rows());
}

EvalHook make_eval_hook(const Eigen::MatrixXd& target_X,
                        const std::vector<int>& target_y, Scenario scenario) {
  return [target_X, target_y, scenario](const DadaNetwork& net) {
    std::vector<std::pair<std::string, double>> out;
    ProbOutput probs = forward(net, target_X);
    std::vector<int> preds = predict_categories(probs);
    out.emplace_back("acc_target", accuracy(preds, target_y));
    out.emplace_back("avg_true_prob",
                     avg_true_class_prob(net, target_X, target_y));
    if (scenario == Scenario::open) {
      OpenSetMetrics m = open_set_metrics(preds, target_y, net.K);
      out.emplace_back("os", m.os);
      out.emplace_back("os_star", m.os_star);
      out.emplace_back("unk_recall", m.unk_recall);
    }
    return out;
  };
}

namespace {

std::map<std::string, double> final_metrics(const DadaNetwork& net,
                                            const Eigen::MatrixXd& target_X,
                                            const std::vector<int>& target_y,
                                            Scenario scenario) {
  std::map<std::string, double> m;
  ProbOutput probs = forward(net, target_X);
  std::vector<int> preds = predict_categories(probs);
  m["acc_target"] = accuracy(preds, target_y);
  m["avg_true_prob"] = avg_true_class_prob(net, target_X, target_y);
  if (scenario == Scenario::open) {
    OpenSetMetrics om = open_set_metrics(preds, target_y, net.K);
    m["os"] = om.os;
    m["os_star"] = om.os_star;
    m["unk_recall"] = om.unk_recall;
  }
  return m;
}

}  // namespace

std::vector<SweepRow> sweep(
    const std::vector<std::pair<std::string, TrainConfig>>& configs,
    const std::function<DatasetPair(std::uint64_t seed)>& make_data,
    const std::vector<std::uint64_t>& seeds,
    const std::vector<std::string>& metrics) {
  if (seeds.empty()) {
    throw std::invalid_argument("sweep: at least one seed required");
  }
  std::vector<SweepRow> rows;
  for (const auto& [knob, base_cfg] : configs) {
    std::map<std::string, std::vector<double>> values;
    for (std::uint64_t seed : seeds) {
      DatasetPair pair = make_data(seed);
      TrainView view = make_train_view(pair);
      TrainConfig cfg = base_cfg;
      cfg.seed = seed;
      TrainState st = train(cfg, view);
      std::vector<int> ty;
      for (const auto& inst : pair.target) ty.push_back(*inst.y - 1);
      auto m = final_metrics(st.net, view.target_X, ty, pair.scenario);
      for (const std::string& name : metrics) {
        auto it = m.find(name);
        if (it == m.end()) {
          throw std::invalid_argument("sweep: unknown metric '" + name + "'");
        }
        values[name].push_back(it->second);
      }
    }
    for (const std::string& name : metrics) {
      const auto& v = values[name];
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
      rows.push_back({knob, name, mean, std::sqrt(var),
                      static_cast<int>(v.size())});
    }
  }
  return rows;
}

std::string format_sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "config" << std::setw(16) << "metric"
     << std::right << std::setw(12) << "mean" << std::setw(12) << "std"
     << std::setw(8) << "seeds" << "\n";
  os << std::setprecision(4) << std::fixed;
  for (const auto& r : rows) {
    os << std::left << std::setw(24) << r.knob << std::setw(16) << r.metric
       << std::right << std::setw(12) << r.mean << std::setw(12) << r.stddev
       << std::setw(8) << r.n_seeds << "\n";
  }
  return os.str();
}

}  // namespace dada
