#include <cmath>

#include "ccopf/sensitivity.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace ccopf;
using namespace ccopf::testing;

namespace {

// The implicit map [g(u); l(u)] evaluated directly, for differencing.
Eigen::VectorXd implicit_map(const Eigen::VectorXd& uvec, const NetworkCase& net,
                             const AdmittanceMatrix& Y, const VariableIndex& idx) {
  (void)net;
  const VoltageState s = VoltageState::unpack(uvec, idx);
  Eigen::VectorXd p, q;
  injections(s, Y, p, q);
  Eigen::VectorXd out(idx.dim_u());
  int row = 0;
  for (int g = 0; g < idx.n_gen(); ++g) out[row++] = s.v[idx.gen_bus[g]];
  for (int gidx : idx.nonslack_gens) out[row++] = p[idx.gen_bus[gidx]];
  for (int b : idx.load_bus) {
    out[row++] = p[b];
    out[row++] = q[b];
  }
  return out;
}

Eigen::VectorXd constraint_map(const Eigen::VectorXd& uvec, const NetworkCase& net,
                               const AdmittanceMatrix& Y, const VariableIndex& idx,
                               const LoadVector& phi) {
  const VoltageState s = VoltageState::unpack(uvec, idx);
  return constraint_values(s, net, idx, Y, phi).values;
}

LoadVector nominal_loads(const NetworkCase& net) {
  LoadVector phi;
  phi.p_d.resize(net.n_bus());
  phi.q_d.resize(net.n_bus());
  for (int b = 0; b < net.n_bus(); ++b) {
    phi.p_d[b] = net.buses[b].p_d;
    phi.q_d[b] = net.buses[b].q_d;
  }
  return phi;
}

}  // namespace

TEST_CASE("power-flow jacobian matches central differences") {
  for (const char* name : {"case2.m", "case6ww.m", "case14.m"}) {
    const NetworkCase net = load_fixture(name);
    const AdmittanceMatrix Y = build_admittance(net);
    const VariableIndex idx = partition_variables(net);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const VoltageState s = random_state(idx, seed);
      const Eigen::VectorXd u0 = s.pack(idx);
      const Eigen::MatrixXd J = pf_jacobian(s, Y, idx);
      const Eigen::MatrixXd J_fd = central_diff(
          [&](const Eigen::VectorXd& u) { return implicit_map(u, net, Y, idx); }, u0, 1e-6);
      CHECK(rel_err(J, J_fd) < 1e-5);
    }
  }
}

TEST_CASE("generator-voltage rows are canonical unit vectors") {
  const NetworkCase net = load_fixture("case14.m");
  const AdmittanceMatrix Y = build_admittance(net);
  const VariableIndex idx = partition_variables(net);
  const Eigen::MatrixXd J = pf_jacobian(random_state(idx, 4), Y, idx);
  for (int g = 0; g < idx.n_gen(); ++g) {
    Eigen::VectorXd row = J.row(g);
    CHECK(row[idx.gen_bus[g]] == 1.0);
    row[idx.gen_bus[g]] = 0.0;
    CHECK(row.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("angle derivative at a flat lossless state is -B v v") {
  NetworkCase net = strip_shunts(load_fixture("case14.m"), /*reset_taps=*/true);
  for (BranchRecord& br : net.branches) br.r = 0.0;  // lossless
  const AdmittanceMatrix Y = build_admittance(net);
  VoltageState flat{Eigen::VectorXd::Ones(14), Eigen::VectorXd::Zero(14)};
  const InjectionJacobian J = injection_jacobian(flat, Y);
  for (int n = 0; n < 14; ++n)
    for (int k = 0; k < 14; ++k)
      if (n != k) CHECK(J.dp_dth(n, k) == doctest::Approx(-Y.B(n, k)).epsilon(1e-12));
}

TEST_CASE("state sensitivity matches the re-solve oracle") {
  const NetworkCase net = load_fixture("case14.m");
  const AdmittanceMatrix Y = build_admittance(net);
  const VariableIndex idx = partition_variables(net);
  const LoadVector phi = nominal_loads(net);

  Eigen::VectorXd x0(idx.dim_x());
  x0 << 1.04, 1.03, 1.01, 1.04, 1.04, 0.35, 0.35, 0.35, 0.35;
  const VoltageState u0 = solve_pf(net, Y, idx, Dispatch::unpack(x0, idx), phi);
  const Eigen::MatrixXd S = sensitivity(u0, Y, idx);

  SUBCASE("finite differences through the solver") {
    const Eigen::MatrixXd S_fd = central_diff(
        [&](const Eigen::VectorXd& x) {
          return solve_pf(net, Y, idx, Dispatch::unpack(x, idx), phi).pack(idx);
        },
        x0, 1e-5);
    CHECK(rel_err(S, S_fd) < 1e-4);
  }
  SUBCASE("voltage-setpoint rows form an identity block") {
    for (int g = 0; g < idx.n_gen(); ++g)
      for (int j = 0; j < idx.dim_x(); ++j)
        CHECK(S(idx.gen_bus[g], j) == doctest::Approx(j == idx.x_vset(g) ? 1.0 : 0.0));
  }
}

TEST_CASE("two-bus sensitivity against the closed-form derivative") {
  const NetworkCase net = load_fixture("case2.m");
  const AdmittanceMatrix Y = build_admittance(net);
  const VariableIndex idx = partition_variables(net);

  // lossless line x_s = 0.1 with q_d2 = 0: 10 v1^2 sin t cos t = -p, so
  // theta2(v1) = -asin(p / (5 v1^2)) / 2 and v2 = v1 cos(theta2)
  const double p_load = 0.5, v1 = 1.02;
  LoadVector phi{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
  phi.p_d[1] = p_load;

  Dispatch d;
  d.v_set = Eigen::VectorXd::Constant(1, v1);
  d.p_g.resize(0);
  const VoltageState u = solve_pf(net, Y, idx, d, phi);

  const double s_arg = p_load / (5.0 * v1 * v1);
  const double theta_expect = -0.5 * std::asin(s_arg);
  CHECK(u.theta[1] == doctest::Approx(theta_expect).epsilon(1e-10));
  CHECK(u.v[1] == doctest::Approx(v1 * std::cos(theta_expect)).epsilon(1e-10));

  const double dtheta_dv1 = p_load / (5.0 * v1 * v1 * v1 * std::sqrt(1.0 - s_arg * s_arg));
  const Eigen::MatrixXd S = sensitivity(u, Y, idx);
  CHECK(S(idx.u_theta(1), 0) == doctest::Approx(dtheta_dv1).epsilon(1e-9));
}

TEST_CASE("constraint jacobian matches central differences") {
  for (const char* name : {"case6ww.m", "case14.m"}) {
    const NetworkCase net = load_fixture(name);
    const AdmittanceMatrix Y = build_admittance(net);
    const VariableIndex idx = partition_variables(net);
    const LoadVector phi = nominal_loads(net);
    for (std::uint64_t seed : {5u, 6u, 7u}) {
      const VoltageState s = random_state(idx, seed);
      const Eigen::MatrixXd J = constraint_jacobian(s, net, idx, Y);
      const Eigen::MatrixXd J_fd = central_diff(
          [&](const Eigen::VectorXd& u) { return constraint_map(u, net, Y, idx, phi); },
          s.pack(idx), 1e-6);
      CHECK(rel_err(J, J_fd) < 1e-5);
    }
  }
}

TEST_CASE("load-voltage constraint rows are signed unit vectors") {
  const NetworkCase net = load_fixture("case14.m");
  const AdmittanceMatrix Y = build_admittance(net);
  const VariableIndex idx = partition_variables(net);
  const Eigen::MatrixXd J = constraint_jacobian(random_state(idx, 8), net, idx, Y);
  for (int i = 0; i < idx.n_rows(); ++i) {
    if (idx.rows[i].kind != ConstraintKind::LoadVoltage) continue;
    Eigen::VectorXd row = J.row(i);
    CHECK(row[idx.rows[i].entity] == idx.rows[i].sign);
    row[idx.rows[i].entity] = 0.0;
    CHECK(row.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("squared-flow rows have zero gradient at zero flow") {
  const NetworkCase net = strip_shunts(load_fixture("case14.m"), /*reset_taps=*/true);
  const AdmittanceMatrix Y = build_admittance(net);
  const VariableIndex idx = partition_variables(net);
  VoltageState flat{Eigen::VectorXd::Ones(14), Eigen::VectorXd::Zero(14)};
  const Eigen::MatrixXd J = constraint_jacobian(flat, net, idx, Y);
  for (int i = 0; i < idx.n_rows(); ++i) {
    if (idx.rows[i].kind != ConstraintKind::FlowFrom && idx.rows[i].kind != ConstraintKind::FlowTo)
      continue;
    CHECK(J.row(i).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("degenerate states raise singularity errors") {
  const NetworkCase net = load_fixture("case2.m");
  const AdmittanceMatrix Y = build_admittance(net);
  const VariableIndex idx = partition_variables(net);
  VoltageState s{Eigen::VectorXd::Ones(2), Eigen::VectorXd::Zero(2)};
  s.v[1] = 1e-300;  // collapse the load bus; the jacobian loses rank
  CHECK_THROWS_AS(sensitivity(s, Y, idx), SingularityError);
}
