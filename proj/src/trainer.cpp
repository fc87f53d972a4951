#include "dada/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dada {

void TrainConfig::validate() const {
  if (!(eta0 > 0.0)) throw std::invalid_argument("config: eta0 must be > 0");
  if (batch_size < 1) {
    throw std::invalid_argument("config: batch_size must be >= 1");
  }
  if (objective == Objective::dada_o && !(q >= 0.0 && q < 0.5)) {
    throw std::invalid_argument("config: q must be in [0, 0.5) for dada_o");
  }
  if (T_cls < 1 || T_adv < 1 || N_alter < 1) {
    throw std::invalid_argument(
        "config: T_cls, T_adv, N_alter must all be >= 1");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("config: momentum must be in [0, 1)");
  }
  if (weight_decay < 0.0) {
    throw std::invalid_argument("config: weight_decay must be >= 0");
  }
  if (condition_threshold < 0.0 || condition_threshold > 1.0) {
    throw std::invalid_argument("config: condition_threshold in [0, 1]");
  }
  if (pretrain_epochs < 0) {
    throw std::invalid_argument("config: pretrain_epochs must be >= 0");
  }
  if (hidden_dims.empty()) {
    throw std::invalid_argument("config: hidden_dims must be non-empty");
  }
}

double lr_schedule(const TrainConfig& cfg, double p) {
  return cfg.eta0 / std::pow(1.0 + cfg.alpha * p, cfg.beta);
}

double lambda_schedule(const TrainConfig& cfg, double p) {
  return 2.0 / (1.0 + std::exp(-cfg.gamma * p)) - 1.0;
}

TrainView make_train_view(const DatasetPair& pair) {
  TrainView v;
  v.source_X = features_matrix(pair.source);
  for (const auto& inst : pair.source) {
    if (!inst.y) {
      throw std::invalid_argument("make_train_view: unlabeled source instance");
    }
    v.source_y.push_back(*inst.y - 1);
  }
  v.target_X = features_matrix(pair.target);
  v.scenario = pair.scenario;
  // Open setting: one extra category neuron for "unknown".
  v.K = pair.scenario == Scenario::open ? pair.K_source + 1 : pair.K_source;
  return v;
}

namespace {

long steps_per_epoch(long n, int batch_size) {
  return (n + batch_size - 1) / batch_size;
}

std::vector<Eigen::MatrixXd*> g_param_ptrs(DadaNetwork& net) {
  std::vector<Eigen::MatrixXd*> out;
  for (std::size_t i = 0; i < net.g_weights.size(); ++i) {
    out.push_back(&net.g_weights[i]);
    out.push_back(&net.g_biases[i]);
  }
  return out;
}

std::vector<Eigen::MatrixXd*> f_param_ptrs(DadaNetwork& net) {
  return {&net.f_weight, &net.f_bias};
}

// SGD with momentum and weight decay; `sign` +1 descends, -1 ascends.
void apply_update(std::vector<Eigen::MatrixXd*> params,
                  const std::vector<Eigen::MatrixXd>& grads,
                  std::vector<Eigen::MatrixXd>& vel, const TrainConfig& cfg,
                  double lr, double sign) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::MatrixXd g = sign * grads[i] + cfg.weight_decay * (*params[i]);
    vel[i] = cfg.momentum * vel[i] + g;
    *params[i] -= lr * vel[i];
  }
}

std::vector<Eigen::MatrixXd> collect_grads(const std::vector<Var>& vars) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(vars.size());
  for (const Var& v : vars) out.push_back(v.grad());
  return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m,
                          const std::vector<long>& idx, long begin, long end) {
  Eigen::MatrixXd out(end - begin, m.cols());
  for (long i = begin; i < end; ++i) out.row(i - begin) = m.row(idx[i]);
  return out;
}

}  // namespace

TrainState init_state(const TrainConfig& cfg, const TrainView& data) {
  cfg.validate();
  if (data.source_X.rows() == 0) {
    throw std::invalid_argument("init_state: empty source set");
  }
  TrainState st;
  std::vector<long> dims;
  dims.push_back(data.source_X.cols());
  dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
  st.net = init_network(dims, data.K, cfg.seed);
  st.rng.seed(cfg.seed * 0x9E3779B97F4A7C15ULL + 1);
  st.total_adv_steps = static_cast<long>(cfg.N_alter) * cfg.T_adv *
                       steps_per_epoch(data.source_X.rows(), cfg.batch_size);
  if (st.total_adv_steps < 1) st.total_adv_steps = 1;
  for (auto* p : g_param_ptrs(st.net)) {
    st.vel_g.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
  }
  for (auto* p : f_param_ptrs(st.net)) {
    st.vel_f.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
  }
  return st;
}

double condition_failure_rate(const DadaNetwork& net,
                              const Eigen::MatrixXd& source_X,
                              const std::vector<int>& source_y,
                              double threshold) {
  if (source_X.rows() == 0) {
    throw std::invalid_argument("condition_failure_rate: empty source set");
  }
  ProbOutput out = forward(net, source_X);
  long failing = 0;
  for (long i = 0; i < source_X.rows(); ++i) {
    if (out.p(i, source_y[i]) <= threshold) ++failing;
  }
  return static_cast<double>(failing) / static_cast<double>(source_X.rows());
}

void classification_epoch(TrainState& state, const TrainConfig& cfg,
                          const TrainView& data) {
  const long n = data.source_X.rows();
  std::vector<long> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), state.rng);

  const double lr = lr_schedule(cfg, state.progress);
  for (long b = 0; b < n; b += cfg.batch_size) {
    long e = std::min(n, b + cfg.batch_size);
    Eigen::MatrixXd Xb = take_rows(data.source_X, idx, b, e);
    std::vector<int> yb;
    for (long i = b; i < e; ++i) yb.push_back(data.source_y[idx[i]]);

    Tape tape;
    ForwardGraph fg = forward_graph(tape, state.net, Xb);
    Var loss = loss_nll_pbar(fg.p, yb, state.net.K);
    tape.backward(loss);
    apply_update(g_param_ptrs(state.net), collect_grads(fg.g_params),
                 state.vel_g, cfg, lr, +1.0);
    apply_update(f_param_ptrs(state.net), collect_grads(fg.f_params),
                 state.vel_f, cfg, lr, +1.0);
    ++state.step;
  }
}

std::map<std::string, double> adversarial_step(
    TrainState& state, const TrainConfig& cfg, const Eigen::MatrixXd& batch_sX,
    const std::vector<int>& batch_sy, const Eigen::MatrixXd& batch_tX,
    const Eigen::VectorXd* weights) {
  const long ns = batch_sX.rows();
  const long nt = batch_tX.rows();
  const double progress =
      static_cast<double>(state.adv_step) /
      static_cast<double>(state.total_adv_steps);
  const double lr = lr_schedule(cfg, progress);
  const double lambda = lambda_schedule(cfg, progress);

  Tape tape;
  Eigen::MatrixXd X(ns + nt, batch_sX.cols());
  X.topRows(ns) = batch_sX;
  X.bottomRows(nt) = batch_tX;
  ForwardGraph fg = forward_graph(tape, state.net, X);

  AssembleInputs in;
  in.p_s = rows(fg.p, 0, ns);
  in.y_s = batch_sy;
  if (nt > 0) in.p_t = rows(fg.p, ns, nt);
  in.K = state.net.K;
  in.lambda = lambda;
  in.placement = cfg.lambda_placement;
  in.q = cfg.q;
  in.weights = weights;

  LossBundle bundle = assemble(cfg.objective, in);

  if (cfg.objective == Objective::source_only || !bundle.L_G) {
    tape.backward(bundle.L_F);
    apply_update(g_param_ptrs(state.net), collect_grads(fg.g_params),
                 state.vel_g, cfg, lr, +1.0);
    apply_update(f_param_ptrs(state.net), collect_grads(fg.f_params),
                 state.vel_f, cfg, lr, +1.0);
  } else {
    Var objective_F = bundle.L_F;
    if (cfg.keep_supervision) {
      // Same supervision signal as pre-training, applied on the F side.
      objective_F = add(objective_F, loss_nll_pbar(in.p_s, batch_sy,
                                                   state.net.K));
    }
    tape.backward(objective_F);
    std::vector<Eigen::MatrixXd> f_grads = collect_grads(fg.f_params);
    tape.zero_grad();
    tape.backward(*bundle.L_G);
    std::vector<Eigen::MatrixXd> g_grads = collect_grads(fg.g_params);

    apply_update(f_param_ptrs(state.net), f_grads, state.vel_f, cfg, lr, +1.0);
    apply_update(g_param_ptrs(state.net), g_grads, state.vel_g, cfg, lr, -1.0);
  }

  ++state.step;
  ++state.adv_step;
  state.progress = static_cast<double>(state.adv_step) /
                   static_cast<double>(state.total_adv_steps);
  return bundle.components;
}

namespace {

void log_epoch(TrainState& state, const TrainConfig& cfg,
               const TrainView& data, Phase phase, int epoch,
               const std::map<std::string, double>& components,
               const EvalHook& hook) {
  ProbOutput out = forward(state.net, data.source_X);
  std::vector<int> preds = predict_categories(out);
  long correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == data.source_y[i]) ++correct;
  }
  double acc_s = static_cast<double>(correct) /
                 static_cast<double>(preds.size());
  double cfr = condition_failure_rate(state.net, data.source_X, data.source_y,
                                      cfg.condition_threshold);
  auto push = [&](const std::string& name, double v, Phase ph) {
    state.history.push_back({state.step, epoch, ph, name, v});
  };
  push("acc_source", acc_s, phase);
  push("cond_fail_rate", cfr, phase);
  for (const auto& [name, v] : components) push("loss_" + name, v, phase);
  if (hook) {
    for (const auto& [name, v] : hook(state.net)) push(name, v, Phase::eval);
  }
}

}  // namespace

void pretrain_source(TrainState& state, const TrainConfig& cfg,
                     const TrainView& data, const EvalHook& hook) {
  for (int e = 0; e < cfg.pretrain_epochs; ++e) {
    classification_epoch(state, cfg, data);
    log_epoch(state, cfg, data, Phase::pretrain, e, {}, hook);
  }
}

TrainState train(const TrainConfig& cfg, const TrainView& data,
                 const EvalHook& hook) {
  cfg.validate();
  if (cfg.objective == Objective::dada_p &&
      data.scenario != Scenario::partial) {
    throw std::runtime_error("train: dada_p requires a partial-scenario "
                             "dataset");
  }
  if (cfg.objective == Objective::dada_o && data.scenario != Scenario::open) {
    throw std::runtime_error("train: dada_o requires an open-scenario "
                             "dataset");
  }
  if (cfg.objective != Objective::source_only && data.target_X.rows() == 0) {
    throw std::runtime_error("train: adversarial objectives need target data");
  }

  TrainState state = init_state(cfg, data);
  pretrain_source(state, cfg, data, hook);

  const long ns = data.source_X.rows();
  const long nt = data.target_X.rows();
  int epoch = cfg.pretrain_epochs;

  for (int alt = 0; alt < cfg.N_alter; ++alt) {
    for (int e = 0; e < cfg.T_cls; ++e, ++epoch) {
      classification_epoch(state, cfg, data);
      log_epoch(state, cfg, data, Phase::cls, epoch, {}, hook);
    }
    for (int e = 0; e < cfg.T_adv; ++e, ++epoch) {
      // Category weights are a dataset-level average, refreshed per epoch.
      Eigen::VectorXd weights;
      bool use_weights = cfg.objective == Objective::dada_p;
      if (use_weights) {
        ProbOutput t_out = forward(state.net, data.target_X);
        double wl = cfg.weight_lambda >= 0.0
                        ? cfg.weight_lambda
                        : lambda_schedule(cfg, state.progress);
        weights = category_weights(t_out.p_bar, wl).c;
      }

      std::vector<long> s_idx(ns), t_idx(std::max<long>(nt, 1));
      std::iota(s_idx.begin(), s_idx.end(), 0);
      std::shuffle(s_idx.begin(), s_idx.end(), state.rng);
      if (nt > 0) {
        std::iota(t_idx.begin(), t_idx.end(), 0);
        std::shuffle(t_idx.begin(), t_idx.end(), state.rng);
      }

      std::map<std::string, double> components;
      long t_pos = 0;
      for (long b = 0; b < ns; b += cfg.batch_size) {
        long be = std::min(ns, b + cfg.batch_size);
        Eigen::MatrixXd Xs = take_rows(data.source_X, s_idx, b, be);
        std::vector<int> ys;
        for (long i = b; i < be; ++i) ys.push_back(data.source_y[s_idx[i]]);

        Eigen::MatrixXd Xt;
        if (nt > 0 && cfg.objective != Objective::source_only) {
          long want = std::min<long>(cfg.batch_size, nt);
          Xt.resize(want, data.target_X.cols());
          for (long i = 0; i < want; ++i) {
            Xt.row(i) = data.target_X.row(t_idx[t_pos]);
            t_pos = (t_pos + 1) % nt;
          }
        }
        components = adversarial_step(state, cfg, Xs, ys, Xt,
                                      use_weights ? &weights : nullptr);
      }
      log_epoch(state, cfg, data, Phase::adv, epoch, components, hook);
      if (use_weights) {
        for (long k = 0; k < weights.size(); ++k) {
          state.history.push_back({state.step, epoch, Phase::adv,
                                   "cat_weight_" + std::to_string(k),
                                   weights(k)});
        }
      }
    }
  }
  return state;
}

namespace {

std::string join_dims(const std::vector<long>& dims) {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ",";
    os << dims[i];
  }
  return os.str();
}

std::vector<long> parse_dims(const std::string& s) {
  std::vector<long> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stol(tok));
  }
  return out;
}

}  // namespace

TrainConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_config: cannot open " + path);
  TrainConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("load_config: line " + std::to_string(lineno) +
                               ": expected key=value");
    }
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    try {
      if (key == "objective") cfg.objective = parse_objective(val);
      else if (key == "eta0") cfg.eta0 = std::stod(val);
      else if (key == "alpha") cfg.alpha = std::stod(val);
      else if (key == "beta") cfg.beta = std::stod(val);
      else if (key == "gamma") cfg.gamma = std::stod(val);
      else if (key == "q") cfg.q = std::stod(val);
      else if (key == "batch_size") cfg.batch_size = std::stoi(val);
      else if (key == "momentum") cfg.momentum = std::stod(val);
      else if (key == "weight_decay") cfg.weight_decay = std::stod(val);
      else if (key == "T_cls") cfg.T_cls = std::stoi(val);
      else if (key == "T_adv") cfg.T_adv = std::stoi(val);
      else if (key == "N_alter") cfg.N_alter = std::stoi(val);
      else if (key == "pretrain_epochs") cfg.pretrain_epochs = std::stoi(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "lambda_placement")
        cfg.lambda_placement = val == "adversarial_only"
                                   ? LambdaPlacement::adversarial_only
                                   : LambdaPlacement::joint;
      else if (key == "condition_threshold")
        cfg.condition_threshold = std::stod(val);
      else if (key == "keep_supervision")
        cfg.keep_supervision = (val == "1" || val == "true" || val == "on");
      else if (key == "hidden_dims") cfg.hidden_dims = parse_dims(val);
      else if (key == "weight_lambda") cfg.weight_lambda = std::stod(val);
      else
        throw std::runtime_error("unknown key '" + key + "'");
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception&) {
      throw std::runtime_error("load_config: line " + std::to_string(lineno) +
                               ": bad value for " + key);
    }
  }
  return cfg;
}

void save_config(const TrainConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_config: cannot open " + path);
  f << std::setprecision(17);
  f << "objective=" << objective_name(cfg.objective) << "\n";
  f << "eta0=" << cfg.eta0 << "\n";
  f << "alpha=" << cfg.alpha << "\n";
  f << "beta=" << cfg.beta << "\n";
  f << "gamma=" << cfg.gamma << "\n";
  f << "q=" << cfg.q << "\n";
  f << "batch_size=" << cfg.batch_size << "\n";
  f << "momentum=" << cfg.momentum << "\n";
  f << "weight_decay=" << cfg.weight_decay << "\n";
  f << "T_cls=" << cfg.T_cls << "\n";
  f << "T_adv=" << cfg.T_adv << "\n";
  f << "N_alter=" << cfg.N_alter << "\n";
  f << "pretrain_epochs=" << cfg.pretrain_epochs << "\n";
  f << "seed=" << cfg.seed << "\n";
  f << "lambda_placement="
    << (cfg.lambda_placement == LambdaPlacement::joint ? "joint"
                                                       : "adversarial_only")
    << "\n";
  f << "condition_threshold=" << cfg.condition_threshold << "\n";
  f << "keep_supervision=" << (cfg.keep_supervision ? "1" : "0") << "\n";
  f << "hidden_dims=" << join_dims(cfg.hidden_dims) << "\n";
  f << "weight_lambda=" << cfg.weight_lambda << "\n";
}

}  // namespace dada
