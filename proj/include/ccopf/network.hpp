#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ccopf/errors.hpp"
#include "json.hpp"

namespace ccopf {

enum class BusType { Load, Generator, Slack };

struct BusRecord {
  int id = 0;  // external bus number from the case file
  BusType type = BusType::Load;
  double p_d = 0.0, q_d = 0.0;  // nominal demand, p.u.
  double gs = 0.0, bs = 0.0;    // shunt conductance/susceptance, p.u.
  double v_min = 0.0, v_max = 0.0;
  bool operator==(const BusRecord&) const = default;
};

struct BranchRecord {
  int from = 0, to = 0;  // internal bus indices
  double r = 0.0, x = 0.0;
  double b_sh = 0.0;      // total line-charging susceptance
  double rate = 0.0;      // apparent-flow limit, p.u.; +inf when unlimited
  double tap = 1.0;       // off-nominal turns ratio, from side
  double shift = 0.0;     // phase shift, rad
  bool operator==(const BranchRecord&) const = default;
};

struct GenRecord {
  int bus = 0;  // internal bus index
  double p_min = 0.0, p_max = 0.0;
  double q_min = 0.0, q_max = 0.0;
  double c2 = 0.0, c1 = 0.0, c0 = 0.0;  // cost $/h with p in p.u. * base_mva
  bool operator==(const GenRecord&) const = default;
};

// Immutable grid description. All quantities per-unit on base_mva.
struct NetworkCase {
  std::string name;
  double base_mva = 100.0;
  std::vector<BusRecord> buses;
  std::vector<BranchRecord> branches;
  std::vector<GenRecord> generators;

  int n_bus() const { return static_cast<int>(buses.size()); }
  int slack_bus() const;  // internal index of the reference bus

  double gen_cost(int g, double p) const {
    const GenRecord& gen = generators[g];
    return (gen.c2 * p + gen.c1) * p + gen.c0;
  }
  double gen_cost_grad(int g, double p) const {
    const GenRecord& gen = generators[g];
    return 2.0 * gen.c2 * p + gen.c1;
  }

  bool operator==(const NetworkCase&) const = default;
};

struct AdmittanceMatrix {
  Eigen::MatrixXd G, B;  // bus admittance Y = G + jB, p.u.
};

// Two-port admittance of one branch (pi model, tap on the from side).
struct BranchTwoPort {
  double gff, bff, gft, bft, gtf, btf, gtt, btt;
};

BranchTwoPort branch_two_port(const BranchRecord& br);

enum class ConstraintKind { GenReactive, SlackActive, SlackReactive, LoadVoltage, FlowFrom, FlowTo };

// One row of the constraint vector in "sign * quantity <= limit" form.
struct ConstraintRow {
  ConstraintKind kind;
  int entity;   // generator, bus, or branch index depending on kind
  double sign;  // +1 upper bound, -1 lower bound
  double limit;
};

// Index maps for the variable partition: controls x, voltage state u,
// demands phi, and the constraint rows y.
struct VariableIndex {
  int n_bus = 0;
  int slack = 0;                    // internal bus index of the reference bus
  int slack_gen = 0;                // generator index of the slack unit
  std::vector<int> gen_bus;         // bus index per generator, case order
  std::vector<int> nonslack_gens;   // generator indices excluding the slack unit
  std::vector<int> load_bus;        // non-generator buses, increasing index
  std::vector<ConstraintRow> rows;  // canonical constraint ordering

  Eigen::VectorXd x_lo, x_hi;  // box on x: gen voltage bounds then p_g bounds

  int n_gen() const { return static_cast<int>(gen_bus.size()); }
  int n_load() const { return static_cast<int>(load_bus.size()); }
  int dim_x() const { return 2 * n_gen() - 1; }
  int dim_u() const { return 2 * n_bus - 1; }
  int dim_phi() const { return 2 * n_bus; }
  int n_rows() const { return static_cast<int>(rows.size()); }

  // u = [v_0 .. v_{N-1}, theta_b for every b != slack in increasing order]
  int u_theta(int bus) const { return n_bus + (bus < slack ? bus : bus - 1); }
  // x = [v_set per generator, p_g per non-slack generator]
  int x_vset(int g) const { return g; }
  int x_pg(int nonslack_pos) const { return n_gen() + nonslack_pos; }

  Eigen::VectorXd limits() const;
};

// Parse MATPOWER case text (mpc.bus / mpc.gen / mpc.branch / mpc.gencost).
NetworkCase parse_case(const std::string& text);
NetworkCase load_case(const std::string& path);

nlohmann::json case_to_json(const NetworkCase& net);
NetworkCase case_from_json(const nlohmann::json& j);

AdmittanceMatrix build_admittance(const NetworkCase& net);
VariableIndex partition_variables(const NetworkCase& net);

}  // namespace ccopf
