// Command-line front end: dataset generation, training runs with replayable
// manifests, evaluation reports, gradient diagnostics, and seeded sweeps.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "dada/datagen.hpp"
#include "dada/eval.hpp"
#include "dada/losses.hpp"
#include "dada/model.hpp"
#include "dada/tensor.hpp"
#include "dada/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

bool log_debug() {
  const char* v = std::getenv("DADA_LOG");
  return v != nullptr && std::string(v) == "debug";
}

std::string fnv1a64_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for hashing");
  std::uint64_t h = 1469598103934665603ULL;
  char c;
  while (f.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0') << std::setw(16) << h;
  return os.str();
}

// A dataset path is either a single combined CSV or a directory holding
// source.csv and target.csv (the `gen` layout).
std::vector<std::string> dataset_files(const std::string& path) {
  if (fs::is_directory(path)) {
    return {(fs::path(path) / "source.csv").string(),
            (fs::path(path) / "target.csv").string()};
  }
  return {path};
}

std::string dataset_hash(const std::string& path) {
  std::string h;
  for (const auto& f : dataset_files(path)) h += fnv1a64_file(f);
  return h;
}

dada::DatasetPair load_dataset(const std::string& path) {
  auto files = dataset_files(path);
  if (files.size() == 1) return dada::load_csv(files[0]);
  dada::DatasetPair s = dada::load_csv(files[0]);
  dada::DatasetPair t = dada::load_csv(files[1]);
  dada::DatasetPair pair;
  pair.source = std::move(s.source);
  pair.target = std::move(t.target);
  if (pair.source.empty()) {
    throw std::runtime_error("load: " + files[0] + " has no source rows");
  }
  std::set<int> src, tgt;
  for (const auto& i : pair.source) {
    if (i.y) src.insert(*i.y);
  }
  for (const auto& i : pair.target) {
    if (i.y) tgt.insert(*i.y);
  }
  pair.K_source = src.empty() ? 0 : *src.rbegin();
  if (tgt.empty() || tgt == src) {
    pair.scenario = dada::Scenario::closed;
    pair.K_target = pair.K_source;
  } else if (*tgt.rbegin() > pair.K_source) {
    pair.scenario = dada::Scenario::open;
    pair.K_target = pair.K_source + 1;
  } else {
    pair.scenario = dada::Scenario::partial;
    pair.K_target = static_cast<int>(tgt.size());
  }
  return pair;
}

json config_to_json(const dada::TrainConfig& c) {
  json j;
  j["objective"] = dada::objective_name(c.objective);
  j["eta0"] = c.eta0;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["gamma"] = c.gamma;
  j["q"] = c.q;
  j["batch_size"] = c.batch_size;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["T_cls"] = c.T_cls;
  j["T_adv"] = c.T_adv;
  j["N_alter"] = c.N_alter;
  j["pretrain_epochs"] = c.pretrain_epochs;
  j["seed"] = c.seed;
  j["lambda_placement"] = c.lambda_placement == dada::LambdaPlacement::joint
                              ? "joint"
                              : "adversarial_only";
  j["condition_threshold"] = c.condition_threshold;
  j["keep_supervision"] = c.keep_supervision;
  j["hidden_dims"] = c.hidden_dims;
  j["weight_lambda"] = c.weight_lambda;
  return j;
}

dada::TrainConfig config_from_json(const json& j) {
  dada::TrainConfig c;
  c.objective = dada::parse_objective(j.at("objective").get<std::string>());
  c.eta0 = j.at("eta0").get<double>();
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.q = j.at("q").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.momentum = j.at("momentum").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.T_cls = j.at("T_cls").get<int>();
  c.T_adv = j.at("T_adv").get<int>();
  c.N_alter = j.at("N_alter").get<int>();
  c.pretrain_epochs = j.at("pretrain_epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.lambda_placement =
      j.at("lambda_placement").get<std::string>() == "joint"
          ? dada::LambdaPlacement::joint
          : dada::LambdaPlacement::adversarial_only;
  c.condition_threshold = j.at("condition_threshold").get<double>();
  c.keep_supervision = j.at("keep_supervision").get<bool>();
  c.hidden_dims = j.at("hidden_dims").get<std::vector<long>>();
  c.weight_lambda = j.at("weight_lambda").get<double>();
  c.validate();
  return c;
}

// Labeled target subset for the evaluation channel; the trainer itself
// never sees these labels.
void labeled_target(const dada::DatasetPair& pair, Eigen::MatrixXd& X,
                    std::vector<int>& y) {
  std::vector<dada::LabeledInstance> labeled;
  for (const auto& inst : pair.target) {
    if (inst.y) labeled.push_back(inst);
  }
  X = dada::features_matrix(labeled);
  y.clear();
  for (const auto& inst : labeled) y.push_back(*inst.y - 1);
}

std::set<int> parse_label_list(const std::vector<int>& v) {
  return std::set<int>(v.begin(), v.end());
}

// ---------------------------------------------------------------- gen ----

struct GenCommon {
  std::string out;
  std::uint64_t seed = 0;
  std::vector<int> restrict_target;
  std::vector<int> restrict_source;
  double ratio = 0.0;  // known:unknown for open restriction
};

void write_dataset(const dada::DatasetPair& pair, const GenCommon& g,
                   const json& params) {
  dada::DatasetPair out = pair;
  if (!g.restrict_target.empty()) {
    out = dada::restrict_target_labels(out,
                                       parse_label_list(g.restrict_target));
  }
  if (!g.restrict_source.empty()) {
    out = dada::restrict_source_labels(out,
                                       parse_label_list(g.restrict_source),
                                       g.ratio);
  }
  fs::create_directories(g.out);
  dada::DatasetPair src_only = out, tgt_only = out;
  src_only.target.clear();
  tgt_only.source.clear();
  dada::save_csv(src_only, (fs::path(g.out) / "source.csv").string());
  dada::save_csv(tgt_only, (fs::path(g.out) / "target.csv").string());
  std::ofstream pf(fs::path(g.out) / "params.json");
  pf << params.dump(2) << "\n";
  std::cout << "wrote " << g.out << " (source=" << out.source.size()
            << " target=" << out.target.size() << ")\n";
}

// -------------------------------------------------------------- diagnose --

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

void report(std::vector<CheckResult>& results, const std::string& name,
            bool pass, const std::string& detail) {
  results.push_back({name, pass, detail});
  std::cout << (pass ? "PASS" : "FAIL") << "  " << name;
  if (!detail.empty()) std::cout << "  (" << detail << ")";
  std::cout << "\n";
}

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double num = (a - b).cwiseAbs().maxCoeff();
  double den = std::max(1e-7, std::max(a.cwiseAbs().maxCoeff(),
                                       b.cwiseAbs().maxCoeff()));
  return num / den;
}

// Analytic tape gradient of a loss of softmax(logits) vs central finite
// differences over the raw logits.
bool grad_check(const std::function<dada::Var(dada::Tape&, const dada::Var&)>&
                    make_loss,
                const Eigen::MatrixXd& logits, double h, double tol,
                double* worst) {
  dada::Tape tape;
  dada::Var z = tape.input(logits, true);
  dada::Var loss = make_loss(tape, z);
  tape.backward(loss);
  Eigen::MatrixXd analytic = z.grad();
  Eigen::MatrixXd numeric = dada::finite_diff_grad(
      [&](const Eigen::MatrixXd& x) {
        dada::Tape t2;
        dada::Var z2 = t2.input(x, false);
        return make_loss(t2, z2).scalar();
      },
      logits, h);
  double e = rel_err(analytic, numeric);
  if (worst) *worst = std::max(*worst, e);
  return e <= tol;
}

int run_diagnose(int points, int trials, const std::string& out) {
  std::vector<CheckResult> results;
  std::mt19937_64 rng(20240);

  // 1. Sign analysis over the probability simplex.
  {
    std::uniform_real_distribution<double> u(1e-6, 1.0);
    int bad = 0;
    for (int i = 0; i < points; ++i) {
      double a = u(rng), b = u(rng), c = u(rng);
      double s = a + b + c;
      double p_y = a / s, p_dom = b / s;
      dada::SourceGradSigns g = dada::grad_signs_source(p_y, p_dom);
      if (g.d_py > 0.0) ++bad;
      if (std::abs(p_y - 0.5) > 1e-9) {
        int want = p_y > 0.5 ? 1 : -1;
        if (g.sign_pdom != want) ++bad;
      }
    }
    report(results, "gradient-sign analysis", bad == 0,
           std::to_string(points) + " simplex points");
  }

  // 2. Finite-difference audits of every loss, random K in 3..6.
  {
    std::uniform_int_distribution<int> pick_k(3, 6);
    std::normal_distribution<double> n01(0.0, 1.0);
    struct Case {
      std::string name;
      std::function<dada::Var(dada::Tape&, const dada::Var&, int,
                              const std::vector<int>&)>
          loss;
    };
    std::vector<Case> cases = {
        {"source discriminative",
         [](dada::Tape&, const dada::Var& z, int K, const std::vector<int>& y) {
           return dada::loss_source_dada(dada::softmax_rows(z), y, K);
         }},
        {"target F",
         [](dada::Tape&, const dada::Var& z, int K, const std::vector<int>&) {
           return dada::loss_target_F_dada(dada::softmax_rows(z), K);
         }},
        {"target G",
         [](dada::Tape&, const dada::Var& z, int K, const std::vector<int>&) {
           return dada::loss_target_G_dada(dada::softmax_rows(z), K);
         }},
        {"entropy",
         [](dada::Tape&, const dada::Var& z, int K, const std::vector<int>&) {
           return dada::loss_entropy(dada::softmax_rows(z), K);
         }},
        {"symmetric confusion",
         [](dada::Tape&, const dada::Var& z, int K, const std::vector<int>&) {
           return dada::loss_symmetric_dc(dada::softmax_rows(z), K);
         }},
        {"open-set target",
         [](dada::Tape&, const dada::Var& z, int K, const std::vector<int>&) {
           return dada::loss_target_F_openset(dada::softmax_rows(z), K, 0.1);
         }},
        {"category cross-entropy",
         [](dada::Tape&, const dada::Var& z, int K, const std::vector<int>& y) {
           return dada::loss_nll_p(dada::softmax_rows(z), y, K);
         }},
    };
    for (const auto& c : cases) {
      double worst = 0.0;
      bool ok = true;
      for (int t = 0; t < trials; ++t) {
        int K = pick_k(rng);
        int n = 4;
        Eigen::MatrixXd z(n, K + 1);
        for (long i = 0; i < z.size(); ++i) z(i) = n01(rng);
        std::vector<int> y(n);
        std::uniform_int_distribution<int> lab(0, K - 1);
        for (auto& l : y) l = lab(rng);
        ok = ok && grad_check(
                       [&](dada::Tape& tp, const dada::Var& zz) {
                         return c.loss(tp, zz, K, y);
                       },
                       z, 1e-5, 1e-4, &worst);
      }
      std::ostringstream d;
      d << trials << " draws, worst rel err " << std::scientific
        << std::setprecision(2) << worst;
      report(results, "finite-difference audit: " + c.name, ok, d.str());
    }
  }

  // 3. Step-direction checks on the source discriminative loss, taken in
  // probability space where the mutual-inhibition analysis lives.
  {
    std::uniform_real_distribution<double> u(1e-3, 1.0);
    int ok_desc = 0, ok_asc = 0, checked_dom = 0, ok_dom = 0;
    for (int t = 0; t < trials; ++t) {
      double a = u(rng), b = u(rng), c = u(rng);
      double s = a + b + c;
      double p_y = a / s, p_dom = b / s;
      dada::SourceGradSigns g = dada::grad_signs_source(p_y, p_dom);
      // Bisect the step from 1e-2 until both coordinates stay in (0,1)
      // and p_y strictly rises.
      double step = 1e-2;
      double py2 = 0.0, pd2 = 0.0;
      for (int bi = 0; bi < 60; ++bi) {
        py2 = p_y - step * g.d_py;
        pd2 = p_dom - step * g.d_pdom;
        if (py2 > p_y && py2 < 1.0 && pd2 > 0.0 && pd2 < 1.0) break;
        step *= 0.5;
      }
      if (py2 > p_y) ++ok_desc;
      if (p_y > 0.5) {
        ++checked_dom;
        if (pd2 < p_dom) ++ok_dom;
      }
      double py3 = p_y + step * g.d_py;
      double pd3 = p_dom + step * g.d_pdom;
      bool asc = py3 < p_y;
      if (p_y > 0.5) asc = asc && pd3 > p_dom;
      if (asc) ++ok_asc;
    }
    report(results, "step-direction: descent raises true-category prob",
           ok_desc == trials,
           std::to_string(ok_desc) + "/" + std::to_string(trials));
    report(results, "step-direction: descent lowers domain prob (p_y>0.5)",
           ok_dom == checked_dom,
           std::to_string(ok_dom) + "/" + std::to_string(checked_dom));
    report(results, "step-direction: ascent reverses both",
           ok_asc == trials,
           std::to_string(ok_asc) + "/" + std::to_string(trials));
  }

  bool all = true;
  for (const auto& r : results) all = all && r.pass;
  if (!out.empty()) {
    fs::create_directories(fs::path(out));
    std::ofstream f(fs::path(out) / "diagnose.txt");
    for (const auto& r : results) {
      f << (r.pass ? "PASS" : "FAIL") << "," << r.name << "," << r.detail
        << "\n";
    }
  }
  std::cout << (all ? "all checks passed" : "CHECKS FAILED") << "\n";
  return all ? kExitOk : kExitData;
}

// ----------------------------------------------------------------- train --

int run_train(const dada::TrainConfig& cfg, const std::string& data_path,
              const std::string& out_dir) {
  dada::DatasetPair pair = load_dataset(data_path);
  dada::TrainView view = dada::make_train_view(pair);

  Eigen::MatrixXd eval_X;
  std::vector<int> eval_y;
  labeled_target(pair, eval_X, eval_y);
  dada::EvalHook hook = nullptr;
  if (eval_X.rows() > 0) {
    hook = dada::make_eval_hook(eval_X, eval_y, pair.scenario);
  }

  dada::TrainState st = dada::train(cfg, view, hook);

  fs::create_directories(out_dir);
  std::string ckpt = (fs::path(out_dir) / "checkpoint.txt").string();
  std::string metrics = (fs::path(out_dir) / "metrics.csv").string();
  dada::save_checkpoint(st.net, ckpt);
  dada::save_metrics(st.history, metrics);

  json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["seed"] = cfg.seed;
  manifest["data"] = {{"path", fs::absolute(data_path).string()},
                      {"fnv1a64", dataset_hash(data_path)}};
  manifest["config"] = config_to_json(cfg);
  manifest["artifacts"] = {{"checkpoint", ckpt}, {"metrics", metrics}};
  std::ofstream mf(fs::path(out_dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";

  if (log_debug()) {
    for (const auto& r : st.history) {
      std::cerr << r.step << "," << r.epoch << "," << dada::phase_name(r.phase)
                << "," << r.name << "," << r.value << "\n";
    }
  }
  double final_acc = -1.0;
  for (const auto& r : st.history) {
    if (r.name == "acc_target") final_acc = r.value;
  }
  std::cout << "trained " << dada::objective_name(cfg.objective) << " for "
            << st.step << " steps";
  if (final_acc >= 0.0) std::cout << "; final acc_target " << final_acc;
  std::cout << "\nmanifest: " << (fs::path(out_dir) / "manifest.json").string()
            << "\n";
  return kExitOk;
}

int run_train_manifest(const std::string& manifest_path,
                       const std::string& out_dir) {
  std::ifstream mf(manifest_path);
  if (!mf) throw std::runtime_error("cannot open manifest " + manifest_path);
  json manifest = json::parse(mf);
  dada::TrainConfig cfg = config_from_json(manifest.at("config"));
  std::string data_path = manifest.at("data").at("path").get<std::string>();
  std::string want = manifest.at("data").at("fnv1a64").get<std::string>();
  std::string got = dataset_hash(data_path);
  if (got != want) {
    throw std::runtime_error("dataset fingerprint mismatch for " + data_path +
                             ": manifest " + want + ", file " + got);
  }
  return run_train(cfg, data_path, out_dir);
}

// ------------------------------------------------------------------ eval --

int run_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& out_dir) {
  dada::DadaNetwork net = dada::load_checkpoint(ckpt_path);
  dada::DatasetPair pair = load_dataset(data_path);
  Eigen::MatrixXd X;
  std::vector<int> y;
  labeled_target(pair, X, y);
  if (X.rows() == 0) {
    throw std::runtime_error("eval: no labeled target instances in " +
                             data_path);
  }
  dada::ProbOutput probs = dada::forward(net, X);
  std::vector<int> preds = dada::predict_categories(probs);
  dada::EvalReport rep = dada::evaluate(preds, y, net.K);

  fs::create_directories(out_dir);
  std::ostringstream table;
  table << std::fixed << std::setprecision(4);
  table << std::left << std::setw(12) << "class" << std::right << std::setw(10)
        << "accuracy" << "\n";
  for (std::size_t k = 0; k < rep.per_class_acc.size(); ++k) {
    table << std::left << std::setw(12) << ("class_" + std::to_string(k + 1))
          << std::right << std::setw(10);
    if (std::isnan(rep.per_class_acc[k])) {
      table << "n/a";
    } else {
      table << rep.per_class_acc[k];
    }
    table << "\n";
  }
  table << std::left << std::setw(12) << "overall" << std::right
        << std::setw(10) << rep.overall << "\n";
  table << std::left << std::setw(12) << "per_class" << std::right
        << std::setw(10) << dada::per_class_mean(rep.per_class_acc) << "\n";
  if (pair.scenario == dada::Scenario::open) {
    dada::OpenSetMetrics m = dada::open_set_metrics(preds, y, net.K);
    table << std::left << std::setw(12) << "OS" << std::right << std::setw(10)
          << m.os << "\n";
    table << std::left << std::setw(12) << "OS*" << std::right << std::setw(10)
          << m.os_star << "\n";
    table << std::left << std::setw(12) << "unk_recall" << std::right
          << std::setw(10) << m.unk_recall << "\n";
  }
  std::ofstream tf(fs::path(out_dir) / "report.txt");
  tf << table.str();
  std::cout << table.str();

  std::ofstream rf(fs::path(out_dir) / "report.csv");
  rf << std::setprecision(17);
  for (std::size_t k = 0; k < rep.per_class_acc.size(); ++k) {
    rf << "class_" << (k + 1) << "," << rep.per_class_acc[k] << "\n";
  }
  rf << "overall," << rep.overall << "\n";
  rf << "per_class," << dada::per_class_mean(rep.per_class_acc) << "\n";
  if (pair.scenario == dada::Scenario::open) {
    dada::OpenSetMetrics m = dada::open_set_metrics(preds, y, net.K);
    rf << "os," << m.os << "\nos_star," << m.os_star << "\nunk_recall,"
       << m.unk_recall << "\n";
  }
  return kExitOk;
}

// ----------------------------------------------------------------- sweep --

dada::DatasetPair sweep_data(const json& spec, std::uint64_t seed) {
  std::string kind = spec.at("kind").get<std::string>();
  dada::DatasetPair pair;
  if (kind == "two-moons") {
    pair = dada::make_two_moons(spec.at("n").get<int>(),
                                spec.at("rot").get<double>(),
                                spec.value("noise", 0.1), seed);
  } else if (kind == "grid") {
    Eigen::Vector2d shift(spec.value("shift_x", 1.0),
                          spec.value("shift_y", 0.5));
    pair = dada::make_gaussian_grid(spec.at("k").get<int>(),
                                    spec.at("n").get<int>(), shift,
                                    spec.value("spread", 0.6), seed);
  } else {
    throw std::invalid_argument("sweep: unknown dataset kind '" + kind + "'");
  }
  if (spec.contains("restrict_target")) {
    auto v = spec.at("restrict_target").get<std::vector<int>>();
    pair = dada::restrict_target_labels(pair, {v.begin(), v.end()});
  }
  if (spec.contains("restrict_source")) {
    auto v = spec.at("restrict_source").get<std::vector<int>>();
    pair = dada::restrict_source_labels(pair, {v.begin(), v.end()},
                                        spec.value("ratio", 0.0));
  }
  return pair;
}

int run_sweep(const std::string& spec_path, const std::string& out_dir) {
  std::ifstream sf(spec_path);
  if (!sf) throw std::runtime_error("cannot open sweep spec " + spec_path);
  json spec = json::parse(sf);

  auto seeds = spec.at("seeds").get<std::vector<std::uint64_t>>();
  if (seeds.empty()) {
    std::cerr << "sweep: at least one seed is required\n";
    return kExitUsage;
  }
  auto metrics = spec.at("metrics").get<std::vector<std::string>>();
  json data_spec = spec.at("data");

  std::vector<std::pair<std::string, dada::TrainConfig>> configs;
  for (const auto& entry : spec.at("configs")) {
    std::string name = entry.at("name").get<std::string>();
    dada::TrainConfig cfg;
    if (entry.contains("config")) {
      cfg = dada::load_config(entry.at("config").get<std::string>());
    }
    if (entry.contains("overrides")) {
      json merged = config_to_json(cfg);
      merged.update(entry.at("overrides"));
      cfg = config_from_json(merged);
    }
    configs.emplace_back(name, cfg);
  }

  std::vector<dada::SweepRow> rows = dada::sweep(
      configs, [&](std::uint64_t s) { return sweep_data(data_spec, s); },
      seeds, metrics);
  std::string table = dada::format_sweep_table(rows);
  std::cout << table;
  fs::create_directories(out_dir);
  std::ofstream tf(fs::path(out_dir) / "sweep.txt");
  tf << table;
  std::ofstream cf(fs::path(out_dir) / "sweep.csv");
  cf << std::setprecision(17);
  for (const auto& r : rows) {
    cf << r.knob << "," << r.metric << "," << r.mean << "," << r.stddev << ","
       << r.n_seeds << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discriminative adversarial domain adaptation toolkit"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->require_subcommand(1);
  GenCommon gmoons, ggrid;
  int moons_n = 0;
  double moons_rot = 30.0, moons_noise = 0.1;
  auto* moons = gen->add_subcommand("two-moons", "Two-moons pair");
  moons->add_option("--n", moons_n, "Instances per domain")->required();
  moons->add_option("--rot", moons_rot, "Target rotation (degrees)");
  moons->add_option("--noise", moons_noise, "Noise standard deviation");
  moons->add_option("--seed", gmoons.seed, "RNG seed");
  moons->add_option("-o,--out", gmoons.out, "Output directory")->required();
  moons->add_option("--restrict-target", gmoons.restrict_target,
                    "Keep only these target labels")
      ->delimiter(',');
  moons->add_option("--restrict-source", gmoons.restrict_source,
                    "Keep only these source labels (open scenario)")
      ->delimiter(',');
  moons->add_option("--ratio", gmoons.ratio,
                    "known:unknown target ratio for open scenarios");

  int grid_k = 0, grid_n = 100;
  double grid_sx = 1.0, grid_sy = 0.5, grid_spread = 0.6;
  auto* grid = gen->add_subcommand("grid", "Gaussian-grid pair");
  grid->add_option("--k", grid_k, "Number of classes")->required();
  grid->add_option("--n", grid_n, "Instances per class per domain");
  grid->add_option("--shift-x", grid_sx, "Target shift x");
  grid->add_option("--shift-y", grid_sy, "Target shift y");
  grid->add_option("--spread", grid_spread, "Cluster standard deviation");
  grid->add_option("--seed", ggrid.seed, "RNG seed");
  grid->add_option("-o,--out", ggrid.out, "Output directory")->required();
  grid->add_option("--restrict-target", ggrid.restrict_target,
                   "Keep only these target labels")
      ->delimiter(',');
  grid->add_option("--restrict-source", ggrid.restrict_source,
                   "Keep only these source labels (open scenario)")
      ->delimiter(',');
  grid->add_option("--ratio", ggrid.ratio,
                   "known:unknown target ratio for open scenarios");

  // train
  std::string tr_config, tr_data, tr_out, tr_manifest;
  auto* train_cmd = app.add_subcommand("train", "Run a training job");
  train_cmd->add_option("--config", tr_config, "key=value config file");
  train_cmd->add_option("--data", tr_data, "Dataset CSV or gen directory");
  train_cmd->add_option("--manifest", tr_manifest,
                        "Replay an existing run manifest");
  train_cmd->add_option("-o,--out", tr_out, "Output directory")->required();

  // eval
  std::string ev_ckpt, ev_data, ev_out;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data", ev_data, "Dataset CSV or gen directory")
      ->required();
  eval_cmd->add_option("-o,--out", ev_out, "Output directory")->required();

  // diagnose
  int dg_points = 10000, dg_trials = 100;
  std::string dg_out;
  auto* diag_cmd =
      app.add_subcommand("diagnose", "Gradient and dynamics checks");
  diag_cmd->add_option("--points", dg_points, "Simplex sample count");
  diag_cmd->add_option("--trials", dg_trials, "Random draws per audit");
  diag_cmd->add_option("-o,--out", dg_out, "Optional report directory");

  // sweep
  std::string sw_spec, sw_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "Multi-seed config sweep");
  sweep_cmd->add_option("--spec", sw_spec, "Sweep spec JSON")->required();
  sweep_cmd->add_option("-o,--out", sw_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (moons->parsed()) {
      dada::DatasetPair pair =
          dada::make_two_moons(moons_n, moons_rot, moons_noise, gmoons.seed);
      json params = {{"kind", "two-moons"},   {"n", moons_n},
                     {"rot", moons_rot},      {"noise", moons_noise},
                     {"seed", gmoons.seed}};
      write_dataset(pair, gmoons, params);
      return kExitOk;
    }
    if (grid->parsed()) {
      dada::DatasetPair pair = dada::make_gaussian_grid(
          grid_k, grid_n, {grid_sx, grid_sy}, grid_spread, ggrid.seed);
      json params = {{"kind", "grid"},       {"k", grid_k},
                     {"n", grid_n},          {"shift_x", grid_sx},
                     {"shift_y", grid_sy},   {"spread", grid_spread},
                     {"seed", ggrid.seed}};
      write_dataset(pair, ggrid, params);
      return kExitOk;
    }
    if (train_cmd->parsed()) {
      if (!tr_manifest.empty()) {
        return run_train_manifest(tr_manifest, tr_out);
      }
      if (tr_config.empty() || tr_data.empty()) {
        std::cerr << "train: either --manifest or both --config and --data "
                     "are required\n";
        return kExitUsage;
      }
      return run_train(dada::load_config(tr_config), tr_data, tr_out);
    }
    if (eval_cmd->parsed()) return run_eval(ev_ckpt, ev_data, ev_out);
    if (diag_cmd->parsed()) return run_diagnose(dg_points, dg_trials, dg_out);
    if (sweep_cmd->parsed()) return run_sweep(sw_spec, sw_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
