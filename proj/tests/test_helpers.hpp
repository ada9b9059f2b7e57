#pragma once

#include <complex>
#include <functional>
#include <string>

#include "ccopf/network.hpp"
#include "ccopf/powerflow.hpp"
#include "ccopf/rng.hpp"

namespace ccopf::testing {

inline std::string data_path(const std::string& name) {
  return std::string(CCOPF_DATA_DIR) + "/" + name;
}

inline NetworkCase load_fixture(const std::string& name) { return load_case(data_path(name)); }

// Textbook pi-model assembly in complex arithmetic, kept independent of the
// real-valued implementation it checks.
inline Eigen::MatrixXcd admittance_oracle(const NetworkCase& net) {
  using cd = std::complex<double>;
  const int n = net.n_bus();
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
  for (const BranchRecord& br : net.branches) {
    const cd ys = 1.0 / cd(br.r, br.x);
    const cd bc(0.0, br.b_sh / 2.0);
    const cd tap = br.tap * std::exp(cd(0.0, br.shift));
    Y(br.from, br.from) += (ys + bc) / (br.tap * br.tap);
    Y(br.from, br.to) += -ys / std::conj(tap);
    Y(br.to, br.from) += -ys / tap;
    Y(br.to, br.to) += ys + bc;
  }
  for (int i = 0; i < n; ++i) Y(i, i) += cd(net.buses[i].gs, net.buses[i].bs);
  return Y;
}

// Series ohmic loss summed over branches: r * |I_series|^2.
inline double branch_loss_oracle(const NetworkCase& net, const VoltageState& u) {
  using cd = std::complex<double>;
  double total = 0.0;
  for (const BranchRecord& br : net.branches) {
    const cd ys = 1.0 / cd(br.r, br.x);
    const cd tap = br.tap * std::exp(cd(0.0, br.shift));
    const cd vf = u.v[br.from] * std::exp(cd(0.0, u.theta[br.from]));
    const cd vt = u.v[br.to] * std::exp(cd(0.0, u.theta[br.to]));
    const cd i_series = ys * (vf / tap - vt);
    total += br.r * std::norm(i_series);
  }
  return total;
}

// Copy of a case with all shunt elements removed (and optionally taps reset).
inline NetworkCase strip_shunts(NetworkCase net, bool reset_taps = false) {
  for (BranchRecord& br : net.branches) {
    br.b_sh = 0.0;
    if (reset_taps) {
      br.tap = 1.0;
      br.shift = 0.0;
    }
  }
  for (BusRecord& b : net.buses) {
    b.gs = 0.0;
    b.bs = 0.0;
  }
  return net;
}

inline VoltageState random_state(const VariableIndex& idx, std::uint64_t seed,
                                 double v_spread = 0.05, double theta_spread = 0.25) {
  Rng rng(seed);
  VoltageState s;
  s.v.resize(idx.n_bus);
  s.theta.resize(idx.n_bus);
  for (int b = 0; b < idx.n_bus; ++b) {
    s.v[b] = rng.uniform(1.0 - v_spread, 1.0 + v_spread);
    s.theta[b] = rng.uniform(-theta_spread, theta_spread);
  }
  s.theta[idx.slack] = 0.0;
  return s;
}

// Central-difference Jacobian of a vector map.
inline Eigen::MatrixXd central_diff(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x0, double h) {
  const Eigen::VectorXd f0 = f(x0);
  Eigen::MatrixXd J(f0.size(), x0.size());
  Eigen::VectorXd x = x0;
  for (int j = 0; j < x0.size(); ++j) {
    x[j] = x0[j] + h;
    const Eigen::VectorXd fp = f(x);
    x[j] = x0[j] - h;
    const Eigen::VectorXd fm = f(x);
    x[j] = x0[j];
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

inline double rel_err(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  const double scale = std::max(want.cwiseAbs().maxCoeff(), 1e-12);
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

}  // namespace ccopf::testing
