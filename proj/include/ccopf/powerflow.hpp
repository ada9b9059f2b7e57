#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "ccopf/network.hpp"

namespace ccopf {

// Polar voltage state; theta at the reference bus is identically zero.
struct VoltageState {
  Eigen::VectorXd v;      // magnitudes, p.u.
  Eigen::VectorXd theta;  // angles, rad

  // pack as u = [v_0..v_{N-1}, theta w/o slack]
  Eigen::VectorXd pack(const VariableIndex& idx) const;
  static VoltageState unpack(const Eigen::VectorXd& u, const VariableIndex& idx);
};

struct LoadVector {
  Eigen::VectorXd p_d, q_d;  // per bus, p.u.
};

// Control vector: generator voltage setpoints and non-slack active generation.
struct Dispatch {
  Eigen::VectorXd v_set;  // per generator, case order
  Eigen::VectorXd p_g;    // per non-slack generator, case order

  Eigen::VectorXd pack() const;
  static Dispatch unpack(const Eigen::VectorXd& x, const VariableIndex& idx);
};

struct ConstraintVector {
  Eigen::VectorXd values;  // sign-adjusted quantities, one per ConstraintRow
  Eigen::VectorXd limits;  // row i satisfied iff values[i] <= limits[i]
};

struct PfSettings {
  double tol = 1e-8;  // infinity norm of the power mismatch
  int max_iter = 20;
};

// Per-branch directed flows and apparent power magnitudes.
struct BranchFlow {
  double p_from, q_from, p_to, q_to;
  double f_from, f_to;  // sqrt(P^2 + Q^2)
};

// Bus injections per the AC power flow equations.
void injections(const VoltageState& u, const AdmittanceMatrix& Y, Eigen::VectorXd& p,
                Eigen::VectorXd& q);

std::vector<BranchFlow> line_flows(const VoltageState& u, const NetworkCase& net);

// Newton-Raphson solve: generator buses hold v and net p, load buses hold
// net p and q, slack holds v and theta = 0.
VoltageState solve_pf(const NetworkCase& net, const AdmittanceMatrix& Y, const VariableIndex& idx,
                      const Dispatch& x, const LoadVector& phi,
                      const std::optional<VoltageState>& warm = std::nullopt,
                      const PfSettings& settings = {});

// Evaluate every constraint row at a solved state.
ConstraintVector constraint_values(const VoltageState& u, const NetworkCase& net,
                                   const VariableIndex& idx, const AdmittanceMatrix& Y,
                                   const LoadVector& phi);

// Slack active generation recovered from a solved state.
double slack_generation(const VoltageState& u, const AdmittanceMatrix& Y,
                        const VariableIndex& idx, const LoadVector& phi);

// Total generation cost in $/h, including the slack unit.
double dispatch_cost(const NetworkCase& net, const VariableIndex& idx, const Dispatch& x,
                     double slack_p);

// Dense partial derivatives of all bus injections w.r.t. v and theta.
struct InjectionJacobian {
  Eigen::MatrixXd dp_dv, dp_dth, dq_dv, dq_dth;  // N x N blocks
};

InjectionJacobian injection_jacobian(const VoltageState& u, const AdmittanceMatrix& Y);

}  // namespace ccopf
