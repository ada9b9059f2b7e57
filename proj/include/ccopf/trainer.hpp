#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "ccopf/policy.hpp"
#include "ccopf/powerflow.hpp"

namespace ccopf {

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double delta = 1e-8;
};

struct TrainConfig {
  double alpha = 0.05;    // admissible violation probability
  double epsilon = 0.01;  // logistic sharpness
  int epochs = 5;
  double mu0 = 1e-3;  // primal step, halves each epoch
  double nu0 = 3e-4;  // dual step, decays as 1/sqrt(k)
  double radius = 0.1;  // load variation R
  int k_train = 800;
  int k_test = 200;
  std::uint64_t seed = 1;
  AdamSettings adam;
  PfSettings pf;
  PolicyMode mode = PolicyMode::Full;
  double abort_failure_fraction = 0.2;  // PF failures per epoch before abort

  void validate() const;
};

struct TrainState {
  PolicyParams params;
  Eigen::VectorXd lambda;          // one multiplier per constraint row
  Eigen::VectorXd adam_m, adam_v;  // first/second moments
  long adam_t = 0;                 // Adam updates performed
  long iteration = 0;              // k, counts attempted samples
  int epoch = 0;
  long skipped = 0;
  std::optional<VoltageState> warm;
};

struct IterationRecord {
  long k = 0;
  int epoch = 0;
  double cost = 0.0;         // NaN when the sample was skipped
  double lambda_norm = 0.0;  // after the update
  double mu = 0.0;           // primal step applied this iteration
  double nu = 0.0;           // dual step applied this iteration
  bool skipped = false;
};

struct EpochRecord {
  int epoch = 0;
  double avg_cost = 0.0;
  double dual_norm = 0.0;
  double violation_estimate = 0.0;  // max per-constraint hard-violation freq
  int pf_failures = 0;
  int samples = 0;
  int solved = 0;
  double nu_sum = 0.0;
  Eigen::VectorXd nu_weighted_sat;   // sum of nu_k * smoothed satisfaction
  Eigen::VectorXi violation_counts;  // hard violations per constraint row
  Eigen::VectorXd lambda_start, lambda_end;
};

struct TrainHistory {
  std::vector<IterationRecord> iterations;
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  PolicyParams params;
  TrainHistory history;
  long skipped = 0;
};

struct Metrics {
  Eigen::VectorXd violation_freq;  // per constraint row
  double max_violation_pct = 0.0;
  double avg_cost = 0.0;
  std::vector<double> sample_costs;  // NaN where PF failed
  double eval_seconds = 0.0;
  int pf_failures = 0;
  int n_samples = 0;
};

// Logistic surrogate of the satisfaction indicator: ~1 where x < 0
// (constraint satisfied), ~0 where x > 0, 1/2 at x = 0.  Stable for
// |x/epsilon| well beyond 1e4.
double logistic(double x, double epsilon);
double logistic_grad(double x, double epsilon);

// Per-bus multiplier m ~ U[1-R, 1+R] applied jointly to (p_d, q_d).
std::vector<LoadVector> sample_loads(const NetworkCase& net, double radius, int count,
                                     std::uint64_t seed);

// One seeded pool of k_train + k_test samples partitioned by shuffled index,
// so training and evaluation share provenance.
struct SampleSplit {
  std::vector<LoadVector> train, test;
};
SampleSplit make_split(const NetworkCase& net, double radius, int k_train, int k_test,
                       std::uint64_t seed);

struct LagrangianTerms {
  double cost = 0.0;            // $/h including the slack unit
  Eigen::VectorXd margins;      // y - ybar per row
  Eigen::VectorXd satisfaction; // logistic of the margins
  Eigen::VectorXd grad_w;       // d/dw of cost - lambda . satisfaction
  Dispatch dispatch;
  VoltageState state;
};

LagrangianTerms lagrangian_terms(const NetworkCase& net, const AdmittanceMatrix& Y,
                                 const VariableIndex& idx, const PolicyParams& params,
                                 const Eigen::VectorXd& lambda, const LoadVector& phi,
                                 const TrainConfig& cfg,
                                 const std::optional<VoltageState>& warm = std::nullopt);

// One stochastic primal-dual step on a single load realization.  Power-flow
// divergence skips the sample and leaves parameters and duals untouched.
void spd_step(TrainState& state, const NetworkCase& net, const AdmittanceMatrix& Y,
              const VariableIndex& idx, const LoadVector& phi, const TrainConfig& cfg,
              IterationRecord* record = nullptr, EpochRecord* epoch_record = nullptr);

TrainResult train(const NetworkCase& net, const TrainConfig& cfg);

Metrics evaluate(const PolicyParams& params, const NetworkCase& net,
                 const std::vector<LoadVector>& samples, const PfSettings& pf = {},
                 int threads = 0);

nlohmann::json metrics_to_json(const Metrics& m);
Metrics metrics_from_json(const nlohmann::json& j);
void write_history_csv(const TrainHistory& history, const std::string& path);

TrainConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const TrainConfig& cfg);

}  // namespace ccopf
