// ccopf command line: train dispatch policies, evaluate them against the
// deterministic per-sample solver, and compare metric files.
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ccopf/network.hpp"
#include "ccopf/opf.hpp"
#include "ccopf/policy.hpp"
#include "ccopf/sensitivity.hpp"
#include "ccopf/sha256.hpp"
#include "ccopf/trainer.hpp"

namespace fs = std::filesystem;
using namespace ccopf;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string timestamp_utc() {
  char buf[32];
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct CommonOpts {
  std::string case_path;
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<int> epochs;
  std::optional<std::string> mode;
  std::optional<double> nu0;
  std::optional<double> mu0;
  std::optional<double> radius;
  std::optional<double> epsilon;
  std::optional<int> k_train, k_test;
  std::optional<double> adam_beta1, adam_beta2, adam_delta;
  std::optional<double> pf_tol;
  std::optional<int> pf_max_iter;
};

TrainConfig resolve_config(const CommonOpts& opts) {
  TrainConfig cfg;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) throw ValidationError("config file not found: " + opts.config_path);
    nlohmann::json j;
    in >> j;
    cfg = config_from_json(j);
  }
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.alpha) cfg.alpha = *opts.alpha;
  if (opts.epochs) cfg.epochs = *opts.epochs;
  if (opts.nu0) cfg.nu0 = *opts.nu0;
  if (opts.mu0) cfg.mu0 = *opts.mu0;
  if (opts.radius) cfg.radius = *opts.radius;
  if (opts.epsilon) cfg.epsilon = *opts.epsilon;
  if (opts.k_train) cfg.k_train = *opts.k_train;
  if (opts.k_test) cfg.k_test = *opts.k_test;
  if (opts.adam_beta1) cfg.adam.beta1 = *opts.adam_beta1;
  if (opts.adam_beta2) cfg.adam.beta2 = *opts.adam_beta2;
  if (opts.adam_delta) cfg.adam.delta = *opts.adam_delta;
  if (opts.pf_tol) cfg.pf.tol = *opts.pf_tol;
  if (opts.pf_max_iter) cfg.pf.max_iter = *opts.pf_max_iter;
  if (opts.mode) {
    if (*opts.mode != "full" && *opts.mode != "agc") throw ValidationError("mode must be full or agc");
    cfg.mode = *opts.mode == "agc" ? PolicyMode::Agc : PolicyMode::Full;
  }
  cfg.validate();
  return cfg;
}

void write_manifest(const fs::path& dir, const std::string& command, const CommonOpts& opts,
                    const TrainConfig& cfg, const std::string& started,
                    const std::vector<std::string>& outputs) {
  nlohmann::json j;
  j["tool_version"] = kToolVersion;
  j["command"] = command;
  j["case_path"] = opts.case_path;
  j["case_sha256"] = sha256_file(opts.case_path);
  j["config"] = config_to_json(cfg);
  j["started_utc"] = started;
  j["finished_utc"] = timestamp_utc();
  j["outputs"] = outputs;
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << "\n";
}

void print_metrics_table(const Metrics& m, const std::string& label) {
  std::printf("%-10s  max violation %6.2f %%   avg cost $%.2f   eval %.3f s   pf failures %d/%d\n",
              label.c_str(), m.max_violation_pct, m.avg_cost, m.eval_seconds, m.pf_failures,
              m.n_samples);
}

int cmd_train(const CommonOpts& opts) {
  const std::string started = timestamp_utc();
  const TrainConfig cfg = resolve_config(opts);
  const NetworkCase net = load_case(opts.case_path);

  const TrainResult result = train(net, cfg);
  fs::create_directories(opts.out_dir);
  const fs::path dir(opts.out_dir);

  save_policy(result.params, (dir / "checkpoint.json").string());
  write_history_csv(result.history, (dir / "history.csv").string());
  write_manifest(dir, "train", opts, cfg, started,
                 {"checkpoint.json", "history.csv", "manifest.json"});

  std::printf("trained %d epochs x %d samples on %s (%ld skipped)\n", cfg.epochs, cfg.k_train,
              net.name.c_str(), result.skipped);
  if (!result.history.epochs.empty()) {
    const EpochRecord& last = result.history.epochs.back();
    std::printf("final epoch: avg cost $%.2f, dual norm %.4g, violation estimate %.1f %%\n",
                last.avg_cost, last.dual_norm, 100.0 * last.violation_estimate);
  }
  std::printf("checkpoint: %s\n", (dir / "checkpoint.json").c_str());
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& checkpoint, const std::string& policy_kind,
             int threads) {
  const std::string started = timestamp_utc();
  const TrainConfig cfg = resolve_config(opts);
  const NetworkCase net = load_case(opts.case_path);
  const SampleSplit split = make_split(net, cfg.radius, cfg.k_train, cfg.k_test, cfg.seed);

  Metrics metrics;
  std::string label;
  if (policy_kind == "baseline") {
    label = "baseline";
    const AdmittanceMatrix Y = build_admittance(net);
    const VariableIndex idx = partition_variables(net);
    const int m = idx.n_rows();
    metrics.n_samples = static_cast<int>(split.test.size());
    metrics.violation_freq = Eigen::VectorXd::Zero(m);
    const auto t0 = std::chrono::steady_clock::now();
    std::optional<Dispatch> warm;
    for (const LoadVector& phi : split.test) {
      const OpfSolution sol = solve_opf(net, Y, idx, phi, warm);
      warm = sol.x;
      if (!sol.converged) {
        ++metrics.pf_failures;
        metrics.violation_freq.array() += 1.0;
        metrics.sample_costs.push_back(std::nan(""));
        continue;
      }
      const ConstraintVector y = constraint_values(sol.u, net, idx, Y, phi);
      for (int i = 0; i < m; ++i)
        if (y.values[i] > y.limits[i]) metrics.violation_freq[i] += 1.0;
      metrics.sample_costs.push_back(sol.cost);
    }
    const auto t1 = std::chrono::steady_clock::now();
    metrics.eval_seconds = std::chrono::duration<double>(t1 - t0).count();
    metrics.violation_freq /= std::max(1, metrics.n_samples);
    metrics.max_violation_pct = 100.0 * metrics.violation_freq.maxCoeff();
    double total = 0.0;
    int counted = 0;
    for (double c : metrics.sample_costs)
      if (std::isfinite(c)) {
        total += c;
        ++counted;
      }
    metrics.avg_cost = counted ? total / counted : std::nan("");
  } else {
    label = "policy";
    const PolicyParams params = load_policy(checkpoint);
    metrics = evaluate(params, net, split.test, cfg.pf, threads);
  }

  fs::create_directories(opts.out_dir);
  const fs::path dir(opts.out_dir);
  {
    std::ofstream out(dir / "metrics.json");
    out << metrics_to_json(metrics).dump(2) << "\n";
  }
  write_manifest(dir, "eval", opts, cfg, started, {"metrics.json", "manifest.json"});
  print_metrics_table(metrics, label);
  return 0;
}

int cmd_compare(const std::vector<std::string>& files, const std::string& out_path) {
  if (files.empty()) throw ValidationError("compare needs at least one metrics file");
  std::string csv = "policy,max_violation_pct,avg_cost,eval_seconds,pf_failures\n";
  std::string md =
      "| policy | max violation [%] | avg cost [$] | eval time [s] | pf failures |\n"
      "|---|---|---|---|---|\n";
  for (const std::string& f : files) {
    std::ifstream in(f);
    if (!in) throw ValidationError("metrics file not found: " + f);
    nlohmann::json j;
    in >> j;
    const Metrics m = metrics_from_json(j);
    std::string label = fs::path(f).stem().string();
    if (label == "metrics" && fs::path(f).has_parent_path())
      label = fs::path(f).parent_path().filename().string();
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%.4f,%.4f,%.4f,%d\n", label.c_str(),
                  m.max_violation_pct, m.avg_cost, m.eval_seconds, m.pf_failures);
    csv += line;
    std::snprintf(line, sizeof(line), "| %s | %.2f | %.2f | %.3f | %d |\n", label.c_str(),
                  m.max_violation_pct, m.avg_cost, m.eval_seconds, m.pf_failures);
    md += line;
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << csv;
    std::ofstream outmd(fs::path(out_path).replace_extension(".md"));
    outmd << md;
  }
  std::cout << md;
  return 0;
}

int cmd_pf(const CommonOpts& opts, const std::string& dispatch_path, bool dump_case) {
  const NetworkCase net = load_case(opts.case_path);
  if (dump_case) {
    std::cout << case_to_json(net).dump(2) << "\n";
    return 0;
  }
  const AdmittanceMatrix Y = build_admittance(net);
  const VariableIndex idx = partition_variables(net);

  LoadVector phi;
  phi.p_d.resize(net.n_bus());
  phi.q_d.resize(net.n_bus());
  for (int b = 0; b < net.n_bus(); ++b) {
    phi.p_d[b] = net.buses[b].p_d;
    phi.q_d[b] = net.buses[b].q_d;
  }

  Dispatch x;
  if (!dispatch_path.empty()) {
    std::ifstream in(dispatch_path);
    if (!in) throw ValidationError("dispatch file not found: " + dispatch_path);
    nlohmann::json j;
    in >> j;
    const auto v = j.at("v_set").get<std::vector<double>>();
    const auto p = j.at("p_g").get<std::vector<double>>();
    if (static_cast<int>(v.size()) != idx.n_gen() ||
        static_cast<int>(p.size()) != idx.n_gen() - 1)
      throw ValidationError("dispatch dimensions do not match the case");
    x.v_set = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
    x.p_g = Eigen::Map<const Eigen::VectorXd>(p.data(), p.size());
  } else {
    // default: middle of the dispatch box
    const Eigen::VectorXd mid = 0.5 * (idx.x_lo + idx.x_hi);
    x = Dispatch::unpack(mid, idx);
  }

  const VoltageState u = solve_pf(net, Y, idx, x, phi);
  const ConstraintVector y = constraint_values(u, net, idx, Y, phi);

  nlohmann::json j;
  j["case"] = net.name;
  for (int b = 0; b < net.n_bus(); ++b) {
    j["bus"].push_back({{"id", net.buses[b].id},
                        {"v", u.v[b]},
                        {"theta", u.theta[b]}});
  }
  j["constraints"] = {{"values", std::vector<double>(y.values.data(), y.values.data() + y.values.size())},
                      {"satisfied", ((y.values - y.limits).array() <= 0.0).all()}};
  j["slack_p"] = slack_generation(u, Y, idx, phi);
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chance-constrained dispatch policies for AC grids"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string checkpoint, policy_kind = "checkpoint", dispatch_path, compare_out;
  std::vector<std::string> metric_files;
  int threads = 0;

  auto add_common = [&opts](CLI::App* sub, bool needs_case) {
    auto* c = sub->add_option("--case", opts.case_path, "MATPOWER case file");
    if (needs_case) c->required();
    sub->add_option("--config", opts.config_path, "training config JSON");
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option("--seed", opts.seed, "RNG seed");
    sub->add_option("--alpha", opts.alpha, "violation level in (0,1)");
    sub->add_option("--epochs", opts.epochs, "training epochs");
    sub->add_option("--mode", opts.mode, "policy mode: full or agc");
    sub->add_option("--nu0", opts.nu0, "dual step size");
    sub->add_option("--mu0", opts.mu0, "primal step size");
    sub->add_option("--radius", opts.radius, "load variation radius R");
    sub->add_option("--epsilon", opts.epsilon, "logistic sharpness");
    sub->add_option("--k-train", opts.k_train, "training sample count");
    sub->add_option("--k-test", opts.k_test, "test sample count");
    sub->add_option("--adam-beta1", opts.adam_beta1, "Adam first-moment decay");
    sub->add_option("--adam-beta2", opts.adam_beta2, "Adam second-moment decay");
    sub->add_option("--adam-delta", opts.adam_delta, "Adam epsilon");
    sub->add_option("--pf-tol", opts.pf_tol, "power-flow mismatch tolerance");
    sub->add_option("--pf-max-iter", opts.pf_max_iter, "power-flow iteration cap");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train a dispatch policy");
  add_common(train_cmd, true);

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint or the baseline");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--checkpoint", checkpoint, "policy checkpoint JSON");
  eval_cmd->add_option("--policy", policy_kind, "checkpoint (default) or baseline");
  eval_cmd->add_option("--threads", threads, "evaluation threads (0 = auto)");

  CLI::App* compare_cmd = app.add_subcommand("compare", "tabulate metric files side by side");
  compare_cmd->add_option("files", metric_files, "metrics JSON files");
  compare_cmd->add_option("--out", compare_out, "CSV output path (writes .md next to it)");

  bool dump_case = false;
  CLI::App* pf_cmd = app.add_subcommand("pf", "one-shot power flow at nominal loads");
  add_common(pf_cmd, true);
  pf_cmd->add_option("--dispatch", dispatch_path, "dispatch JSON {v_set, p_g}");
  pf_cmd->add_flag("--dump-case", dump_case, "print the parsed case as canonical JSON and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(opts);
    if (eval_cmd->parsed()) {
      if (policy_kind != "baseline" && checkpoint.empty())
        throw ValidationError("eval needs --checkpoint or --policy baseline");
      return cmd_eval(opts, checkpoint, policy_kind, threads);
    }
    if (compare_cmd->parsed()) return cmd_compare(metric_files, compare_out);
    if (pf_cmd->parsed()) return cmd_pf(opts, dispatch_path, dump_case);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const TrainingAbort& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
