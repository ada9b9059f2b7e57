#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "ccopf/network.hpp"
#include "ccopf/powerflow.hpp"

namespace ccopf {

enum class PolicyMode { Full, Agc };

// Layered dispatch policy: linear input layer, two tanh hidden layers of
// half the input width, linear output layer, and a fixed scaled-tanh output
// stage that keeps the dispatch strictly inside its box for any weights.
// In AGC mode the input collapses to the total active demand and the
// voltage-setpoint output rows are frozen at zero.
struct PolicyParams {
  PolicyMode mode = PolicyMode::Full;
  int input_dim = 0, hidden_dim = 0, output_dim = 0;
  Eigen::MatrixXd W1, W2, W3;
  Eigen::VectorXd b1, b2, b3;
  Eigen::VectorXd mid, half;  // output stage: x = mid + half .* tanh(z)
  // fixed input standardization: features = (raw - center) / scale
  Eigen::VectorXd in_center, in_scale;
  int n_bus = 0;
  std::uint64_t seed = 0;
  std::string case_name;

  int n_gen() const { return (output_dim + 1) / 2; }
  int n_params() const;
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& w);
};

// Cached activations of one forward pass.
struct PolicyTrace {
  Eigen::VectorXd input, a1, a2, t_out;  // t_out = tanh(z3)
  Eigen::VectorXd x;
};

PolicyParams init_policy(const NetworkCase& net, const VariableIndex& idx, PolicyMode mode,
                         std::uint64_t seed);

// Reduce loads to the policy's input features.
Eigen::VectorXd policy_input(const PolicyParams& params, const LoadVector& phi);

PolicyTrace forward_trace(const PolicyParams& params, const LoadVector& phi);
Dispatch forward(const PolicyParams& params, const LoadVector& phi);

// Gradient of seed . x w.r.t. the flattened weights (reverse mode).
Eigen::VectorXd policy_vjp(const PolicyParams& params, const PolicyTrace& trace,
                           const Eigen::VectorXd& seed);

// Full Jacobian dx/dw, dim(x) x dim(w).  Frozen weights give zero columns.
Eigen::MatrixXd policy_jacobian(const PolicyParams& params, const LoadVector& phi);

nlohmann::json policy_to_json(const PolicyParams& params);
PolicyParams policy_from_json(const nlohmann::json& j);
void save_policy(const PolicyParams& params, const std::string& path);
PolicyParams load_policy(const std::string& path);

}  // namespace ccopf
