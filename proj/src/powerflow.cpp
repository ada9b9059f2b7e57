#include "ccopf/powerflow.hpp"

#include <cmath>
#include <limits>

namespace ccopf {

Eigen::VectorXd VoltageState::pack(const VariableIndex& idx) const {
  Eigen::VectorXd u(idx.dim_u());
  u.head(idx.n_bus) = v;
  for (int b = 0; b < idx.n_bus; ++b)
    if (b != idx.slack) u[idx.u_theta(b)] = theta[b];
  return u;
}

VoltageState VoltageState::unpack(const Eigen::VectorXd& u, const VariableIndex& idx) {
  VoltageState s;
  s.v = u.head(idx.n_bus);
  s.theta = Eigen::VectorXd::Zero(idx.n_bus);
  for (int b = 0; b < idx.n_bus; ++b)
    if (b != idx.slack) s.theta[b] = u[idx.u_theta(b)];
  return s;
}

Eigen::VectorXd Dispatch::pack() const {
  Eigen::VectorXd x(v_set.size() + p_g.size());
  x << v_set, p_g;
  return x;
}

Dispatch Dispatch::unpack(const Eigen::VectorXd& x, const VariableIndex& idx) {
  Dispatch d;
  d.v_set = x.head(idx.n_gen());
  d.p_g = x.tail(idx.n_gen() - 1);
  return d;
}

void injections(const VoltageState& u, const AdmittanceMatrix& Y, Eigen::VectorXd& p,
                Eigen::VectorXd& q) {
  const int n = static_cast<int>(u.v.size());
  p.resize(n);
  q.resize(n);
  for (int i = 0; i < n; ++i) {
    double pi = 0.0, qi = 0.0;
    for (int k = 0; k < n; ++k) {
      const double g = Y.G(i, k), b = Y.B(i, k);
      if (g == 0.0 && b == 0.0) continue;
      const double d = u.theta[i] - u.theta[k];
      const double c = std::cos(d), s = std::sin(d);
      pi += u.v[k] * (g * c + b * s);
      qi += u.v[k] * (g * s - b * c);
    }
    p[i] = u.v[i] * pi;
    q[i] = u.v[i] * qi;
  }
}

InjectionJacobian injection_jacobian(const VoltageState& u, const AdmittanceMatrix& Y) {
  const int n = static_cast<int>(u.v.size());
  Eigen::VectorXd p, q;
  injections(u, Y, p, q);

  InjectionJacobian J;
  J.dp_dv = Eigen::MatrixXd::Zero(n, n);
  J.dp_dth = Eigen::MatrixXd::Zero(n, n);
  J.dq_dv = Eigen::MatrixXd::Zero(n, n);
  J.dq_dth = Eigen::MatrixXd::Zero(n, n);

  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const double g = Y.G(i, k), b = Y.B(i, k);
      if (i == k) continue;
      if (g == 0.0 && b == 0.0) continue;
      const double d = u.theta[i] - u.theta[k];
      const double c = std::cos(d), s = std::sin(d);
      J.dp_dv(i, k) = u.v[i] * (g * c + b * s);
      J.dp_dth(i, k) = u.v[i] * u.v[k] * (g * s - b * c);
      J.dq_dv(i, k) = u.v[i] * (g * s - b * c);
      J.dq_dth(i, k) = -u.v[i] * u.v[k] * (g * c + b * s);
    }
    J.dp_dv(i, i) = p[i] / u.v[i] + u.v[i] * Y.G(i, i);
    J.dp_dth(i, i) = -q[i] - u.v[i] * u.v[i] * Y.B(i, i);
    J.dq_dv(i, i) = q[i] / u.v[i] - u.v[i] * Y.B(i, i);
    J.dq_dth(i, i) = p[i] - u.v[i] * u.v[i] * Y.G(i, i);
  }
  return J;
}

std::vector<BranchFlow> line_flows(const VoltageState& u, const NetworkCase& net) {
  std::vector<BranchFlow> flows;
  flows.reserve(net.branches.size());
  for (const BranchRecord& br : net.branches) {
    const BranchTwoPort y = branch_two_port(br);
    const double vn = u.v[br.from], vk = u.v[br.to];
    const double d = u.theta[br.from] - u.theta[br.to];
    const double c = std::cos(d), s = std::sin(d);
    BranchFlow f;
    f.p_from = y.gff * vn * vn + vn * vk * (y.gft * c + y.bft * s);
    f.q_from = -y.bff * vn * vn + vn * vk * (y.gft * s - y.bft * c);
    f.p_to = y.gtt * vk * vk + vn * vk * (y.gtf * c - y.btf * s);
    f.q_to = -y.btt * vk * vk - vn * vk * (y.gtf * s + y.btf * c);
    f.f_from = std::hypot(f.p_from, f.q_from);
    f.f_to = std::hypot(f.p_to, f.q_to);
    flows.push_back(f);
  }
  return flows;
}

VoltageState solve_pf(const NetworkCase& net, const AdmittanceMatrix& Y, const VariableIndex& idx,
                      const Dispatch& x, const LoadVector& phi,
                      const std::optional<VoltageState>& warm, const PfSettings& settings) {
  const int n = idx.n_bus;

  VoltageState state;
  if (warm) {
    state = *warm;
  } else {
    state.v = Eigen::VectorXd::Ones(n);
    state.theta = Eigen::VectorXd::Zero(n);
  }
  state.theta[idx.slack] = 0.0;

  // pin magnitudes at generator buses
  for (int g = 0; g < idx.n_gen(); ++g) state.v[idx.gen_bus[g]] = x.v_set[g];

  // specified net injections
  Eigen::VectorXd p_spec = -phi.p_d, q_spec = -phi.q_d;
  for (size_t j = 0; j < idx.nonslack_gens.size(); ++j)
    p_spec[idx.gen_bus[idx.nonslack_gens[j]]] += x.p_g[j];

  // mismatch rows: P at every non-slack bus, then Q at every load bus
  std::vector<int> p_rows, q_rows;
  for (int b = 0; b < n; ++b)
    if (b != idx.slack) p_rows.push_back(b);
  q_rows = idx.load_bus;
  const int m = static_cast<int>(p_rows.size() + q_rows.size());

  // unknown columns: theta at non-slack buses, v at load buses
  Eigen::VectorXd p, q, mismatch(m);
  Eigen::MatrixXd jac(m, m);

  double residual = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter <= settings.max_iter; ++iter) {
    injections(state, Y, p, q);
    for (size_t i = 0; i < p_rows.size(); ++i) mismatch[i] = p[p_rows[i]] - p_spec[p_rows[i]];
    for (size_t i = 0; i < q_rows.size(); ++i)
      mismatch[p_rows.size() + i] = q[q_rows[i]] - q_spec[q_rows[i]];

    residual = mismatch.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(residual)) throw PowerFlowDivergence(residual, iter);
    if (residual < settings.tol) return state;
    if (iter == settings.max_iter) break;

    const InjectionJacobian J = injection_jacobian(state, Y);
    for (size_t i = 0; i < p_rows.size(); ++i) {
      for (size_t k = 0; k < p_rows.size(); ++k) jac(i, k) = J.dp_dth(p_rows[i], p_rows[k]);
      for (size_t k = 0; k < q_rows.size(); ++k)
        jac(i, p_rows.size() + k) = J.dp_dv(p_rows[i], q_rows[k]);
    }
    for (size_t i = 0; i < q_rows.size(); ++i) {
      for (size_t k = 0; k < p_rows.size(); ++k)
        jac(p_rows.size() + i, k) = J.dq_dth(q_rows[i], p_rows[k]);
      for (size_t k = 0; k < q_rows.size(); ++k)
        jac(p_rows.size() + i, p_rows.size() + k) = J.dq_dv(q_rows[i], q_rows[k]);
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    const Eigen::VectorXd pivots = lu.matrixLU().diagonal().cwiseAbs();
    if (pivots.maxCoeff() == 0.0 || pivots.minCoeff() <= 1e-14 * pivots.maxCoeff())
      throw SingularityError("singular power-flow Jacobian");
    Eigen::VectorXd step = lu.solve(mismatch);
    if (!step.allFinite()) throw SingularityError("singular power-flow Jacobian");

    for (size_t i = 0; i < p_rows.size(); ++i) state.theta[p_rows[i]] -= step[i];
    for (size_t i = 0; i < q_rows.size(); ++i) state.v[q_rows[i]] -= step[p_rows.size() + i];
    if ((state.v.array() <= 0.0).any()) throw PowerFlowDivergence(residual, iter + 1);
  }
  throw PowerFlowDivergence(residual, settings.max_iter);
}

double slack_generation(const VoltageState& u, const AdmittanceMatrix& Y,
                        const VariableIndex& idx, const LoadVector& phi) {
  Eigen::VectorXd p, q;
  injections(u, Y, p, q);
  return p[idx.slack] + phi.p_d[idx.slack];
}

double dispatch_cost(const NetworkCase& net, const VariableIndex& idx, const Dispatch& x,
                     double slack_p) {
  double total = net.gen_cost(idx.slack_gen, slack_p);
  for (size_t j = 0; j < idx.nonslack_gens.size(); ++j)
    total += net.gen_cost(idx.nonslack_gens[j], x.p_g[j]);
  return total;
}

ConstraintVector constraint_values(const VoltageState& u, const NetworkCase& net,
                                   const VariableIndex& idx, const AdmittanceMatrix& Y,
                                   const LoadVector& phi) {
  Eigen::VectorXd p, q;
  injections(u, Y, p, q);
  const std::vector<BranchFlow> flows = line_flows(u, net);

  ConstraintVector y;
  y.values.resize(idx.n_rows());
  y.limits = idx.limits();
  for (int i = 0; i < idx.n_rows(); ++i) {
    const ConstraintRow& row = idx.rows[i];
    double quantity = 0.0;
    switch (row.kind) {
      case ConstraintKind::GenReactive: {
        const int b = net.generators[row.entity].bus;
        quantity = q[b] + phi.q_d[b];
        break;
      }
      case ConstraintKind::SlackActive:
        quantity = p[idx.slack] + phi.p_d[idx.slack];
        break;
      case ConstraintKind::SlackReactive:
        quantity = q[idx.slack] + phi.q_d[idx.slack];
        break;
      case ConstraintKind::LoadVoltage:
        quantity = u.v[row.entity];
        break;
      case ConstraintKind::FlowFrom:
        quantity = flows[row.entity].f_from * flows[row.entity].f_from;
        break;
      case ConstraintKind::FlowTo:
        quantity = flows[row.entity].f_to * flows[row.entity].f_to;
        break;
    }
    y.values[i] = row.sign * quantity;
  }
  return y;
}

}  // namespace ccopf
