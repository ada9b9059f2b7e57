#include "ccopf/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "ccopf/rng.hpp"
#include "ccopf/sensitivity.hpp"

namespace ccopf {

void TrainConfig::validate() const {
  if (alpha <= 0.0 || alpha >= 1.0) throw ValidationError("alpha must lie in (0, 1)");
  if (epsilon <= 0.0) throw ValidationError("epsilon must be positive");
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (mu0 < 0.0 || nu0 < 0.0) throw ValidationError("step sizes must be non-negative");
  if (radius < 0.0 || radius >= 1.0) throw ValidationError("load radius must lie in [0, 1)");
  if (k_train <= 0 || k_test <= 0) throw ValidationError("sample counts must be positive");
}

double logistic(double x, double epsilon) {
  const double z = x / epsilon;
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

double logistic_grad(double x, double epsilon) {
  const double l = logistic(x, epsilon);
  return -l * (1.0 - l) / epsilon;
}

std::vector<LoadVector> sample_loads(const NetworkCase& net, double radius, int count,
                                     std::uint64_t seed) {
  const int n = net.n_bus();
  Eigen::VectorXd p_nom(n), q_nom(n);
  for (int b = 0; b < n; ++b) {
    p_nom[b] = net.buses[b].p_d;
    q_nom[b] = net.buses[b].q_d;
  }
  Rng rng(Rng::substream(seed, 1));
  std::vector<LoadVector> samples;
  samples.reserve(count);
  for (int k = 0; k < count; ++k) {
    LoadVector phi{p_nom, q_nom};
    for (int b = 0; b < n; ++b) {
      const double m = rng.uniform(1.0 - radius, 1.0 + radius);
      phi.p_d[b] *= m;
      phi.q_d[b] *= m;
    }
    samples.push_back(std::move(phi));
  }
  return samples;
}

SampleSplit make_split(const NetworkCase& net, double radius, int k_train, int k_test,
                       std::uint64_t seed) {
  const auto pool = sample_loads(net, radius, k_train + k_test, seed);
  std::vector<int> order(pool.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(Rng::substream(seed, 2));
  rng.shuffle(order);

  SampleSplit split;
  split.train.reserve(k_train);
  split.test.reserve(k_test);
  for (int i = 0; i < k_train; ++i) split.train.push_back(pool[order[i]]);
  for (int i = 0; i < k_test; ++i) split.test.push_back(pool[order[k_train + i]]);
  return split;
}

LagrangianTerms lagrangian_terms(const NetworkCase& net, const AdmittanceMatrix& Y,
                                 const VariableIndex& idx, const PolicyParams& params,
                                 const Eigen::VectorXd& lambda, const LoadVector& phi,
                                 const TrainConfig& cfg, const std::optional<VoltageState>& warm) {
  LagrangianTerms out;
  const PolicyTrace trace = forward_trace(params, phi);
  out.dispatch = Dispatch::unpack(trace.x, idx);
  out.state = solve_pf(net, Y, idx, out.dispatch, phi, warm, cfg.pf);

  const double slack_p = slack_generation(out.state, Y, idx, phi);
  out.cost = dispatch_cost(net, idx, out.dispatch, slack_p);

  const ConstraintVector y = constraint_values(out.state, net, idx, Y, phi);
  out.margins = y.values - y.limits;
  out.satisfaction.resize(idx.n_rows());
  Eigen::VectorXd active_weight(idx.n_rows());  // -lambda_i * d logistic / d y_i
  for (int i = 0; i < idx.n_rows(); ++i) {
    out.satisfaction[i] = logistic(out.margins[i], cfg.epsilon);
    active_weight[i] = -lambda[i] * logistic_grad(out.margins[i], cfg.epsilon);
  }

  // chain rule: seed the state-space gradient, pull back through the
  // power-flow sensitivity, then through the policy
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(pf_jacobian(out.state, Y, idx));
  const Eigen::MatrixXd S = sensitivity(lu, idx);

  Eigen::VectorXd r_u = Eigen::VectorXd::Zero(idx.dim_u());
  r_u += net.gen_cost_grad(idx.slack_gen, slack_p) *
         slack_injection_gradient(out.state, Y, idx);
  if ((lambda.array() != 0.0).any()) {
    const Eigen::MatrixXd dy_du = constraint_jacobian(out.state, net, idx, Y);
    r_u += dy_du.transpose() * active_weight;
  }

  Eigen::VectorXd r_x = S.transpose() * r_u;
  for (size_t j = 0; j < idx.nonslack_gens.size(); ++j)
    r_x[idx.x_pg(static_cast<int>(j))] +=
        net.gen_cost_grad(idx.nonslack_gens[j], out.dispatch.p_g[j]);

  out.grad_w = policy_vjp(params, trace, r_x);
  return out;
}

void spd_step(TrainState& state, const NetworkCase& net, const AdmittanceMatrix& Y,
              const VariableIndex& idx, const LoadVector& phi, const TrainConfig& cfg,
              IterationRecord* record, EpochRecord* epoch_record) {
  const long k = ++state.iteration;
  const double nu_k = cfg.nu0 / std::sqrt(static_cast<double>(k));

  const double mu_k = cfg.mu0 * std::pow(0.5, state.epoch);

  LagrangianTerms terms;
  try {
    terms = lagrangian_terms(net, Y, idx, state.params, state.lambda, phi, cfg, state.warm);
  } catch (const SolveError&) {
    ++state.skipped;
    state.warm.reset();  // stale warm starts are the usual culprit
    if (record) *record = {k, state.epoch, std::nan(""), state.lambda.norm(), mu_k, nu_k, true};
    if (epoch_record) ++epoch_record->pf_failures;
    return;
  }
  state.warm = terms.state;

  // primal: Adam on grad of cost - lambda . satisfaction, step halves per epoch
  if (cfg.mu0 > 0.0) {
    const double mu = mu_k;
    ++state.adam_t;
    const double t = static_cast<double>(state.adam_t);
    state.adam_m = cfg.adam.beta1 * state.adam_m + (1.0 - cfg.adam.beta1) * terms.grad_w;
    state.adam_v = cfg.adam.beta2 * state.adam_v +
                   (1.0 - cfg.adam.beta2) * terms.grad_w.cwiseProduct(terms.grad_w);
    const Eigen::ArrayXd m_hat = state.adam_m.array() / (1.0 - std::pow(cfg.adam.beta1, t));
    const Eigen::ArrayXd v_hat = state.adam_v.array() / (1.0 - std::pow(cfg.adam.beta2, t));
    Eigen::VectorXd w = state.params.flatten();
    w.array() -= mu * m_hat / (v_hat.sqrt() + cfg.adam.delta);
    state.params.unflatten(w);  // re-applies the AGC freeze mask
  }

  // dual: projected ascent with 1/sqrt(k) decay
  state.lambda = (state.lambda.array() + nu_k * (1.0 - cfg.alpha) -
                  nu_k * terms.satisfaction.array())
                     .max(0.0)
                     .matrix();

  if (record) *record = {k, state.epoch, terms.cost, state.lambda.norm(), mu_k, nu_k, false};
  if (epoch_record) {
    ++epoch_record->solved;
    epoch_record->avg_cost += terms.cost;
    epoch_record->nu_sum += nu_k;
    epoch_record->nu_weighted_sat += nu_k * terms.satisfaction;
    for (int i = 0; i < terms.margins.size(); ++i)
      if (terms.margins[i] > 0.0) ++epoch_record->violation_counts[i];
  }
}

TrainResult train(const NetworkCase& net, const TrainConfig& cfg) {
  cfg.validate();
  const AdmittanceMatrix Y = build_admittance(net);
  const VariableIndex idx = partition_variables(net);
  const SampleSplit split = make_split(net, cfg.radius, cfg.k_train, cfg.k_test, cfg.seed);

  TrainState state;
  state.params = init_policy(net, idx, cfg.mode, cfg.seed);
  state.lambda = Eigen::VectorXd::Zero(idx.n_rows());
  state.adam_m = Eigen::VectorXd::Zero(state.params.n_params());
  state.adam_v = Eigen::VectorXd::Zero(state.params.n_params());

  TrainResult result;
  Rng order_rng(Rng::substream(cfg.seed, 3));
  std::vector<int> order(split.train.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    state.epoch = epoch;
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    order_rng.shuffle(order);

    EpochRecord erec;
    erec.epoch = epoch;
    erec.samples = static_cast<int>(order.size());
    erec.nu_weighted_sat = Eigen::VectorXd::Zero(idx.n_rows());
    erec.violation_counts = Eigen::VectorXi::Zero(idx.n_rows());
    erec.lambda_start = state.lambda;

    for (int pos : order) {
      IterationRecord irec;
      spd_step(state, net, Y, idx, split.train[pos], cfg, &irec, &erec);
      result.history.iterations.push_back(irec);
    }

    erec.avg_cost = erec.solved > 0 ? erec.avg_cost / erec.solved : std::nan("");
    erec.dual_norm = state.lambda.norm();
    erec.lambda_end = state.lambda;
    erec.violation_estimate =
        erec.solved > 0 ? static_cast<double>(erec.violation_counts.maxCoeff()) / erec.solved
                        : 1.0;
    result.history.epochs.push_back(erec);

    if (erec.pf_failures > cfg.abort_failure_fraction * erec.samples)
      throw TrainingAbort("epoch " + std::to_string(epoch) + ": " +
                          std::to_string(erec.pf_failures) + " of " +
                          std::to_string(erec.samples) +
                          " power flows diverged; policy is driving the grid infeasible");
  }

  result.params = state.params;
  result.skipped = state.skipped;
  return result;
}

Metrics evaluate(const PolicyParams& params, const NetworkCase& net,
                 const std::vector<LoadVector>& samples, const PfSettings& pf, int threads) {
  const AdmittanceMatrix Y = build_admittance(net);
  const VariableIndex idx = partition_variables(net);
  if (params.n_bus != idx.n_bus || params.output_dim != idx.dim_x())
    throw ValidationError("checkpoint dimensions do not match the case");

  const int n = static_cast<int>(samples.size());
  const int m = idx.n_rows();
  std::vector<double> costs(n, std::nan(""));
  std::vector<std::uint8_t> violated(static_cast<size_t>(n) * m, 0);
  std::vector<std::uint8_t> failed(n, 0);

  const auto t0 = std::chrono::steady_clock::now();
  auto worker = [&](int begin, int end) {
    for (int s = begin; s < end; ++s) {
      const LoadVector& phi = samples[s];
      try {
        const Dispatch x = forward(params, phi);
        const VoltageState u = solve_pf(net, Y, idx, x, phi, std::nullopt, pf);
        const ConstraintVector y = constraint_values(u, net, idx, Y, phi);
        for (int i = 0; i < m; ++i)
          if (y.values[i] > y.limits[i]) violated[static_cast<size_t>(s) * m + i] = 1;
        costs[s] = dispatch_cost(net, idx, x, slack_generation(u, Y, idx, phi));
      } catch (const SolveError&) {
        failed[s] = 1;  // conservatively counts against every constraint
        for (int i = 0; i < m; ++i) violated[static_cast<size_t>(s) * m + i] = 1;
      }
    }
  };

  int n_threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, n));
  if (n_threads == 1) {
    worker(0, n);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      const int begin = t * chunk, end = std::min(n, begin + chunk);
      if (begin < end) pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  const auto t1 = std::chrono::steady_clock::now();

  Metrics metrics;
  metrics.n_samples = n;
  metrics.sample_costs = costs;
  metrics.violation_freq = Eigen::VectorXd::Zero(m);
  for (int s = 0; s < n; ++s) {
    metrics.pf_failures += failed[s];
    for (int i = 0; i < m; ++i)
      metrics.violation_freq[i] += violated[static_cast<size_t>(s) * m + i];
  }
  if (n > 0) metrics.violation_freq /= static_cast<double>(n);
  metrics.max_violation_pct = n > 0 ? 100.0 * metrics.violation_freq.maxCoeff() : 0.0;

  double total = 0.0;
  int costed = 0;
  for (double c : costs)
    if (std::isfinite(c)) {
      total += c;
      ++costed;
    }
  metrics.avg_cost = costed > 0 ? total / costed : std::nan("");
  metrics.eval_seconds = std::chrono::duration<double>(t1 - t0).count();
  return metrics;
}

nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["n_samples"] = m.n_samples;
  j["pf_failures"] = m.pf_failures;
  j["max_violation_pct"] = m.max_violation_pct;
  j["avg_cost"] = std::isfinite(m.avg_cost) ? nlohmann::json(m.avg_cost) : nlohmann::json(nullptr);
  j["eval_seconds"] = m.eval_seconds;
  j["violation_freq"] =
      std::vector<double>(m.violation_freq.data(), m.violation_freq.data() + m.violation_freq.size());
  nlohmann::json costs = nlohmann::json::array();
  for (double c : m.sample_costs)
    costs.push_back(std::isfinite(c) ? nlohmann::json(c) : nlohmann::json(nullptr));
  j["sample_costs"] = costs;
  return j;
}

Metrics metrics_from_json(const nlohmann::json& j) {
  if (j.at("schema_version").get<int>() != 1)
    throw ValidationError("unsupported metrics schema version");
  Metrics m;
  m.n_samples = j.at("n_samples").get<int>();
  m.pf_failures = j.at("pf_failures").get<int>();
  m.max_violation_pct = j.at("max_violation_pct").get<double>();
  m.avg_cost = j.at("avg_cost").is_null() ? std::nan("") : j.at("avg_cost").get<double>();
  m.eval_seconds = j.at("eval_seconds").get<double>();
  const auto freq = j.at("violation_freq").get<std::vector<double>>();
  m.violation_freq = Eigen::Map<const Eigen::VectorXd>(freq.data(), freq.size());
  for (const auto& c : j.at("sample_costs"))
    m.sample_costs.push_back(c.is_null() ? std::nan("") : c.get<double>());
  return m;
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write history: " + path);
  out << "iteration,epoch,sample_cost,lambda_norm,mu,nu,epoch_violation_estimate\n";
  char line[200];
  for (const IterationRecord& r : history.iterations) {
    const double est = r.epoch < static_cast<int>(history.epochs.size())
                           ? history.epochs[r.epoch].violation_estimate
                           : std::nan("");
    std::snprintf(line, sizeof(line), "%ld,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.k, r.epoch,
                  r.skipped ? std::nan("") : r.cost, r.lambda_norm, r.mu, r.nu, est);
    out << line;
  }
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  if (j.contains("alpha")) cfg.alpha = j["alpha"].get<double>();
  if (j.contains("epsilon")) cfg.epsilon = j["epsilon"].get<double>();
  if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
  if (j.contains("mu0")) cfg.mu0 = j["mu0"].get<double>();
  if (j.contains("nu0")) cfg.nu0 = j["nu0"].get<double>();
  if (j.contains("radius")) cfg.radius = j["radius"].get<double>();
  if (j.contains("k_train")) cfg.k_train = j["k_train"].get<int>();
  if (j.contains("k_test")) cfg.k_test = j["k_test"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("mode"))
    cfg.mode = j["mode"].get<std::string>() == "agc" ? PolicyMode::Agc : PolicyMode::Full;
  if (j.contains("adam")) {
    const auto& a = j["adam"];
    if (a.contains("beta1")) cfg.adam.beta1 = a["beta1"].get<double>();
    if (a.contains("beta2")) cfg.adam.beta2 = a["beta2"].get<double>();
    if (a.contains("delta")) cfg.adam.delta = a["delta"].get<double>();
  }
  if (j.contains("pf")) {
    const auto& p = j["pf"];
    if (p.contains("tol")) cfg.pf.tol = p["tol"].get<double>();
    if (p.contains("max_iter")) cfg.pf.max_iter = p["max_iter"].get<int>();
  }
  cfg.validate();
  return cfg;
}

nlohmann::json config_to_json(const TrainConfig& cfg) {
  return nlohmann::json{
      {"alpha", cfg.alpha},
      {"epsilon", cfg.epsilon},
      {"epochs", cfg.epochs},
      {"mu0", cfg.mu0},
      {"nu0", cfg.nu0},
      {"radius", cfg.radius},
      {"k_train", cfg.k_train},
      {"k_test", cfg.k_test},
      {"seed", cfg.seed},
      {"mode", cfg.mode == PolicyMode::Agc ? "agc" : "full"},
      {"adam", {{"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"delta", cfg.adam.delta}}},
      {"pf", {{"tol", cfg.pf.tol}, {"max_iter", cfg.pf.max_iter}}}};
}

}  // namespace ccopf
