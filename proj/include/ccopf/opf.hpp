#pragma once

#include <Eigen/Dense>
#include <optional>

#include "ccopf/powerflow.hpp"

namespace ccopf {

struct OpfSettings {
  double tol_feas = 1e-4;      // max constraint residual, p.u.
  double tol_grad = 1e-5;      // projected-gradient norm on the scaled objective
  int max_outer = 30;
  int max_inner = 200;
};

struct OpfSolution {
  Dispatch x;
  VoltageState u;
  double cost = 0.0;          // $/h
  double max_residual = 0.0;  // max over rows of (value - limit), clamped at 0
  int iterations = 0;         // total inner gradient steps
  int outer_rounds = 0;
  bool converged = false;
};

// Deterministic per-realization OPF: augmented-Lagrangian outer loop with a
// projected-gradient inner loop over the dispatch box, all gradients through
// the power-flow sensitivity.
OpfSolution solve_opf(const NetworkCase& net, const AdmittanceMatrix& Y,
                      const VariableIndex& idx, const LoadVector& phi,
                      const std::optional<Dispatch>& start = std::nullopt,
                      const OpfSettings& settings = {}, const PfSettings& pf = {});

}  // namespace ccopf
