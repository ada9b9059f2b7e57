#include "ccopf/sensitivity.hpp"

#include <cmath>

namespace ccopf {

namespace {

// Scatter d/dv and d/dtheta rows into u ordering.
void scatter_row(Eigen::MatrixXd& out, int row, const Eigen::VectorXd& d_dv,
                 const Eigen::VectorXd& d_dth, const VariableIndex& idx) {
  out.block(row, 0, 1, idx.n_bus) = d_dv.transpose();
  for (int b = 0; b < idx.n_bus; ++b)
    if (b != idx.slack) out(row, idx.u_theta(b)) = d_dth[b];
}

}  // namespace

Eigen::MatrixXd pf_jacobian(const VoltageState& u, const AdmittanceMatrix& Y,
                            const VariableIndex& idx) {
  const InjectionJacobian J = injection_jacobian(u, Y);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(idx.dim_u(), idx.dim_u());

  int row = 0;
  // generator-bus voltage magnitudes are coordinates of u
  for (int g = 0; g < idx.n_gen(); ++g) out(row++, idx.gen_bus[g]) = 1.0;
  // active injection at non-slack generator buses
  for (int gidx : idx.nonslack_gens) {
    const int b = idx.gen_bus[gidx];
    scatter_row(out, row++, J.dp_dv.row(b), J.dp_dth.row(b), idx);
  }
  // (p, q) pairs at load buses
  for (int b : idx.load_bus) {
    scatter_row(out, row++, J.dp_dv.row(b), J.dp_dth.row(b), idx);
    scatter_row(out, row++, J.dq_dv.row(b), J.dq_dth.row(b), idx);
  }
  return out;
}

Eigen::MatrixXd sensitivity(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu,
                            const VariableIndex& idx) {
  const Eigen::VectorXd pivots = lu.matrixLU().diagonal().cwiseAbs();
  if (pivots.minCoeff() <= 1e-14 * pivots.maxCoeff())
    throw SingularityError("singular power-flow Jacobian in sensitivity solve");
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(idx.dim_u(), idx.dim_x());
  rhs.topLeftCorner(idx.dim_x(), idx.dim_x()).setIdentity();
  Eigen::MatrixXd S = lu.solve(rhs);
  if (!S.allFinite()) throw SingularityError("singular power-flow Jacobian in sensitivity solve");
  return S;
}

Eigen::MatrixXd sensitivity(const VoltageState& u, const AdmittanceMatrix& Y,
                            const VariableIndex& idx) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(pf_jacobian(u, Y, idx));
  return sensitivity(lu, idx);
}

Eigen::VectorXd slack_injection_gradient(const VoltageState& u, const AdmittanceMatrix& Y,
                                         const VariableIndex& idx) {
  const InjectionJacobian J = injection_jacobian(u, Y);
  Eigen::MatrixXd tmp(1, idx.dim_u());
  scatter_row(tmp, 0, J.dp_dv.row(idx.slack), J.dp_dth.row(idx.slack), idx);
  return tmp.row(0).transpose();
}

Eigen::MatrixXd constraint_jacobian(const VoltageState& u, const NetworkCase& net,
                                    const VariableIndex& idx, const AdmittanceMatrix& Y) {
  const InjectionJacobian J = injection_jacobian(u, Y);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(idx.n_rows(), idx.dim_u());

  // flow rows need d(f^2) = 2P dP + 2Q dQ at each branch end
  struct FlowGrad {
    Eigen::Vector4d from, to;  // d(f^2)/d(v_n, v_k, th_n, th_k)
  };
  std::vector<FlowGrad> fg(net.branches.size());
  for (size_t e = 0; e < net.branches.size(); ++e) {
    const BranchRecord& br = net.branches[e];
    const BranchTwoPort y = branch_two_port(br);
    const double vn = u.v[br.from], vk = u.v[br.to];
    const double d = u.theta[br.from] - u.theta[br.to];
    const double c = std::cos(d), s = std::sin(d);

    const double pf = y.gff * vn * vn + vn * vk * (y.gft * c + y.bft * s);
    const double qf = -y.bff * vn * vn + vn * vk * (y.gft * s - y.bft * c);
    const double pt = y.gtt * vk * vk + vn * vk * (y.gtf * c - y.btf * s);
    const double qt = -y.btt * vk * vk - vn * vk * (y.gtf * s + y.btf * c);

    // from side partials
    Eigen::Vector4d dpf, dqf, dpt, dqt;
    dpf << 2.0 * y.gff * vn + vk * (y.gft * c + y.bft * s), vn * (y.gft * c + y.bft * s),
        vn * vk * (-y.gft * s + y.bft * c), vn * vk * (y.gft * s - y.bft * c);
    dqf << -2.0 * y.bff * vn + vk * (y.gft * s - y.bft * c), vn * (y.gft * s - y.bft * c),
        vn * vk * (y.gft * c + y.bft * s), vn * vk * (-y.gft * c - y.bft * s);
    dpt << vk * (y.gtf * c - y.btf * s), 2.0 * y.gtt * vk + vn * (y.gtf * c - y.btf * s),
        vn * vk * (-y.gtf * s - y.btf * c), vn * vk * (y.gtf * s + y.btf * c);
    dqt << -vk * (y.gtf * s + y.btf * c), -2.0 * y.btt * vk - vn * (y.gtf * s + y.btf * c),
        vn * vk * (-y.gtf * c + y.btf * s), vn * vk * (y.gtf * c - y.btf * s);

    fg[e].from = 2.0 * pf * dpf + 2.0 * qf * dqf;
    fg[e].to = 2.0 * pt * dpt + 2.0 * qt * dqt;
  }

  for (int i = 0; i < idx.n_rows(); ++i) {
    const ConstraintRow& row = idx.rows[i];
    switch (row.kind) {
      case ConstraintKind::GenReactive: {
        const int b = net.generators[row.entity].bus;
        scatter_row(out, i, row.sign * J.dq_dv.row(b), row.sign * J.dq_dth.row(b), idx);
        break;
      }
      case ConstraintKind::SlackActive:
        scatter_row(out, i, row.sign * J.dp_dv.row(idx.slack), row.sign * J.dp_dth.row(idx.slack),
                    idx);
        break;
      case ConstraintKind::SlackReactive:
        scatter_row(out, i, row.sign * J.dq_dv.row(idx.slack), row.sign * J.dq_dth.row(idx.slack),
                    idx);
        break;
      case ConstraintKind::LoadVoltage:
        out(i, row.entity) = row.sign;
        break;
      case ConstraintKind::FlowFrom:
      case ConstraintKind::FlowTo: {
        const BranchRecord& br = net.branches[row.entity];
        const Eigen::Vector4d& grad =
            row.kind == ConstraintKind::FlowFrom ? fg[row.entity].from : fg[row.entity].to;
        out(i, br.from) += grad[0];
        out(i, br.to) += grad[1];
        if (br.from != idx.slack) out(i, idx.u_theta(br.from)) += grad[2];
        if (br.to != idx.slack) out(i, idx.u_theta(br.to)) += grad[3];
        break;
      }
    }
  }
  return out;
}

}  // namespace ccopf
