#pragma once

#include <Eigen/Dense>

#include "ccopf/powerflow.hpp"

namespace ccopf {

// Jacobian of the implicit power-flow map [x; z] = [g(u); l(u)] w.r.t.
// u = [v; theta w/o slack].  Row order: generator-bus voltage magnitudes,
// active injections at non-slack generator buses, then (p, q) pairs at
// every load bus.  Square, (2N-1) x (2N-1).
Eigen::MatrixXd pf_jacobian(const VoltageState& u, const AdmittanceMatrix& Y,
                            const VariableIndex& idx);

// State sensitivity dx -> du: solves pf_jacobian * S = [I; 0].
Eigen::MatrixXd sensitivity(const VoltageState& u, const AdmittanceMatrix& Y,
                            const VariableIndex& idx);

// Same solve reusing an existing factorization of pf_jacobian.
Eigen::MatrixXd sensitivity(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu,
                            const VariableIndex& idx);

// Derivatives of every constraint row w.r.t. u.  M x (2N-1).
Eigen::MatrixXd constraint_jacobian(const VoltageState& u, const NetworkCase& net,
                                    const VariableIndex& idx, const AdmittanceMatrix& Y);

// Row vector d(slack p injection)/du, length 2N-1.
Eigen::VectorXd slack_injection_gradient(const VoltageState& u, const AdmittanceMatrix& Y,
                                         const VariableIndex& idx);

}  // namespace ccopf
