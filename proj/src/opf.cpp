#include "ccopf/opf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ccopf/sensitivity.hpp"

namespace ccopf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct PointEval {
  VoltageState u;
  Eigen::VectorXd margins;  // y - ybar
  double cost = 0.0;        // $/h
  double slack_p = 0.0;
  bool feasible_pf = true;
};

// objective of the augmented Lagrangian at fixed multipliers, cost-normalized
double merit(const PointEval& ev, const Eigen::VectorXd& mu, double rho, double cost_scale) {
  double value = ev.cost;
  for (int i = 0; i < ev.margins.size(); ++i) {
    const double shifted = mu[i] + rho * ev.margins[i];
    const double active = shifted > 0.0 ? shifted : 0.0;
    value += (active * active - mu[i] * mu[i]) / (2.0 * rho);
  }
  return value / cost_scale;
}

Eigen::VectorXd clamp_box(const Eigen::VectorXd& x, const VariableIndex& idx) {
  return x.cwiseMax(idx.x_lo).cwiseMin(idx.x_hi);
}

}  // namespace

OpfSolution solve_opf(const NetworkCase& net, const AdmittanceMatrix& Y, const VariableIndex& idx,
                      const LoadVector& phi, const std::optional<Dispatch>& start,
                      const OpfSettings& settings, const PfSettings& pf) {
  Eigen::VectorXd x = start ? clamp_box(start->pack(), idx)
                            : (0.5 * (idx.x_lo + idx.x_hi)).eval();

  std::optional<VoltageState> warm;
  auto eval_point = [&](const Eigen::VectorXd& xv, PointEval& ev) -> bool {
    const Dispatch d = Dispatch::unpack(xv, idx);
    try {
      ev.u = solve_pf(net, Y, idx, d, phi, warm, pf);
    } catch (const SolveError&) {
      try {
        ev.u = solve_pf(net, Y, idx, d, phi, std::nullopt, pf);
      } catch (const SolveError&) {
        ev.feasible_pf = false;
        return false;
      }
    }
    warm = ev.u;
    const ConstraintVector y = constraint_values(ev.u, net, idx, Y, phi);
    ev.margins = y.values - y.limits;
    ev.slack_p = slack_generation(ev.u, Y, idx, phi);
    ev.cost = dispatch_cost(net, idx, Dispatch::unpack(xv, idx), ev.slack_p);
    ev.feasible_pf = true;
    return true;
  };

  OpfSolution sol;
  PointEval ev;
  if (!eval_point(x, ev)) {
    sol.x = Dispatch::unpack(x, idx);
    sol.converged = false;
    return sol;
  }
  const double cost_scale = std::max(1.0, std::abs(ev.cost));

  auto merit_grad = [&](const Eigen::VectorXd& xv, const PointEval& at, const Eigen::VectorXd& mu,
                        double rho) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(pf_jacobian(at.u, Y, idx));
    const Eigen::MatrixXd S = sensitivity(lu, idx);

    Eigen::VectorXd weight(idx.n_rows());
    for (int i = 0; i < idx.n_rows(); ++i) {
      const double shifted = mu[i] + rho * at.margins[i];
      weight[i] = shifted > 0.0 ? shifted : 0.0;
    }

    Eigen::VectorXd r_u = (net.gen_cost_grad(idx.slack_gen, at.slack_p) / cost_scale) *
                          slack_injection_gradient(at.u, Y, idx);
    if ((weight.array() != 0.0).any())
      r_u += constraint_jacobian(at.u, net, idx, Y).transpose() * (weight / cost_scale);

    Eigen::VectorXd grad = S.transpose() * r_u;
    for (size_t j = 0; j < idx.nonslack_gens.size(); ++j)
      grad[idx.x_pg(static_cast<int>(j))] +=
          net.gen_cost_grad(idx.nonslack_gens[j], xv[idx.x_pg(static_cast<int>(j))]) /
          cost_scale;
    return grad;
  };

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(idx.n_rows());
  double rho = 10.0;

  for (int outer = 0; outer < settings.max_outer; ++outer) {
    sol.outer_rounds = outer + 1;

    // projected spectral gradient descent with a non-monotone line search
    Eigen::VectorXd grad = merit_grad(x, ev, mu, rho);
    double pg_norm = (x - clamp_box(x - grad, idx)).lpNorm<Eigen::Infinity>();
    double step = 1.0 / std::max(grad.lpNorm<Eigen::Infinity>(), 1e-6);
    std::vector<double> recent{merit(ev, mu, rho, cost_scale)};

    for (int inner = 0; inner < settings.max_inner && pg_norm >= settings.tol_grad; ++inner) {
      const double f_ref = *std::max_element(recent.begin(), recent.end());
      double t = std::min(std::max(step, 1e-10), 1e6);
      bool accepted = false;
      Eigen::VectorXd trial;
      PointEval trial_ev;
      while (t > 1e-16) {
        trial = clamp_box(x - t * grad, idx);
        const double decrease = grad.dot(x - trial);
        if (eval_point(trial, trial_ev) &&
            merit(trial_ev, mu, rho, cost_scale) <= f_ref - 1e-4 * decrease) {
          accepted = true;
          break;
        }
        t *= 0.25;
      }
      ++sol.iterations;
      if (!accepted) break;

      const Eigen::VectorXd grad_new = merit_grad(trial, trial_ev, mu, rho);
      const Eigen::VectorXd dx = trial - x;
      const Eigen::VectorXd dg = grad_new - grad;
      const double dxdg = dx.dot(dg);
      step = dxdg > 0.0 ? dx.squaredNorm() / dxdg : 10.0 * t;  // Barzilai-Borwein

      x = trial;
      ev = trial_ev;
      grad = grad_new;
      pg_norm = (x - clamp_box(x - grad, idx)).lpNorm<Eigen::Infinity>();
      recent.push_back(merit(ev, mu, rho, cost_scale));
      if (recent.size() > 8) recent.erase(recent.begin());
    }

    const double residual = ev.margins.cwiseMax(0.0).maxCoeff();
    if (residual < settings.tol_feas && pg_norm < settings.tol_grad) {
      sol.converged = true;
      break;
    }

    // first-order multiplier update, then sharpen the penalty
    for (int i = 0; i < idx.n_rows(); ++i)
      mu[i] = std::max(0.0, mu[i] + rho * ev.margins[i]);
    rho = std::min(rho * 4.0, 1e9);
  }

  sol.x = Dispatch::unpack(x, idx);
  sol.u = ev.u;
  sol.cost = ev.cost;
  sol.max_residual = ev.margins.cwiseMax(0.0).maxCoeff();
  return sol;
}

}  // namespace ccopf
