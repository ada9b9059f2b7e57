// Python bindings for the core operations: case parsing, power flow,
// sensitivities, policies, training, and the deterministic baseline.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ccopf/network.hpp"
#include "ccopf/opf.hpp"
#include "ccopf/policy.hpp"
#include "ccopf/sensitivity.hpp"
#include "ccopf/trainer.hpp"

namespace py = pybind11;
using namespace ccopf;

namespace {

LoadVector make_loads(const Eigen::VectorXd& p_d, const Eigen::VectorXd& q_d) {
  return LoadVector{p_d, q_d};
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

PYBIND11_MODULE(_ccopf, m) {
  m.doc() = "chance-constrained dispatch policy learning for AC grids";

  py::register_exception<ParseError>(m, "CaseParseError");
  py::register_exception<ValidationError>(m, "CaseValidationError");
  py::register_exception<PowerFlowDivergence>(m, "PowerFlowDivergenceError");
  py::register_exception<SingularityError>(m, "SingularJacobianError");
  py::register_exception<TrainingAbort>(m, "TrainingAbortError");

  py::enum_<BusType>(m, "BusType")
      .value("Load", BusType::Load)
      .value("Generator", BusType::Generator)
      .value("Slack", BusType::Slack);

  py::enum_<PolicyMode>(m, "PolicyMode")
      .value("Full", PolicyMode::Full)
      .value("Agc", PolicyMode::Agc);

  py::class_<NetworkCase>(m, "NetworkCase")
      .def_readonly("name", &NetworkCase::name)
      .def_readonly("base_mva", &NetworkCase::base_mva)
      .def_property_readonly("n_bus", &NetworkCase::n_bus)
      .def_property_readonly("n_branch",
                             [](const NetworkCase& n) { return n.branches.size(); })
      .def_property_readonly("n_gen",
                             [](const NetworkCase& n) { return n.generators.size(); })
      .def("gen_cost", &NetworkCase::gen_cost)
      .def("to_json", [](const NetworkCase& n) { return case_to_json(n).dump(); })
      .def("__repr__", [](const NetworkCase& n) {
        return "<NetworkCase " + n.name + ": " + std::to_string(n.n_bus()) + " buses>";
      });

  py::class_<AdmittanceMatrix>(m, "AdmittanceMatrix")
      .def_readonly("G", &AdmittanceMatrix::G)
      .def_readonly("B", &AdmittanceMatrix::B);

  py::class_<VariableIndex>(m, "VariableIndex")
      .def_readonly("n_bus", &VariableIndex::n_bus)
      .def_readonly("slack", &VariableIndex::slack)
      .def_property_readonly("n_gen", &VariableIndex::n_gen)
      .def_property_readonly("n_load", &VariableIndex::n_load)
      .def_property_readonly("dim_x", &VariableIndex::dim_x)
      .def_property_readonly("dim_u", &VariableIndex::dim_u)
      .def_property_readonly("dim_phi", &VariableIndex::dim_phi)
      .def_property_readonly("n_constraints", &VariableIndex::n_rows)
      .def("limits", &VariableIndex::limits);

  py::class_<VoltageState>(m, "VoltageState")
      .def_readonly("v", &VoltageState::v)
      .def_readonly("theta", &VoltageState::theta);

  py::class_<LoadVector>(m, "LoadVector")
      .def(py::init(&make_loads), py::arg("p_d"), py::arg("q_d"))
      .def_readonly("p_d", &LoadVector::p_d)
      .def_readonly("q_d", &LoadVector::q_d);

  py::class_<Dispatch>(m, "Dispatch")
      .def_readonly("v_set", &Dispatch::v_set)
      .def_readonly("p_g", &Dispatch::p_g)
      .def("pack", &Dispatch::pack);

  py::class_<ConstraintVector>(m, "ConstraintVector")
      .def_readonly("values", &ConstraintVector::values)
      .def_readonly("limits", &ConstraintVector::limits);

  py::class_<PolicyParams>(m, "PolicyParams")
      .def_property_readonly("mode", [](const PolicyParams& p) { return p.mode; })
      .def_readonly("input_dim", &PolicyParams::input_dim)
      .def_readonly("hidden_dim", &PolicyParams::hidden_dim)
      .def_readonly("output_dim", &PolicyParams::output_dim)
      .def("flatten", &PolicyParams::flatten)
      .def("to_json", [](const PolicyParams& p) { return policy_to_json(p).dump(); });

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &TrainConfig::alpha)
      .def_readwrite("epsilon", &TrainConfig::epsilon)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("mu0", &TrainConfig::mu0)
      .def_readwrite("nu0", &TrainConfig::nu0)
      .def_readwrite("radius", &TrainConfig::radius)
      .def_readwrite("k_train", &TrainConfig::k_train)
      .def_readwrite("k_test", &TrainConfig::k_test)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("mode", &TrainConfig::mode);

  py::class_<Metrics>(m, "Metrics")
      .def_readonly("violation_freq", &Metrics::violation_freq)
      .def_readonly("max_violation_pct", &Metrics::max_violation_pct)
      .def_readonly("avg_cost", &Metrics::avg_cost)
      .def_readonly("sample_costs", &Metrics::sample_costs)
      .def_readonly("eval_seconds", &Metrics::eval_seconds)
      .def_readonly("pf_failures", &Metrics::pf_failures)
      .def_readonly("n_samples", &Metrics::n_samples)
      .def("to_json", [](const Metrics& mt) { return metrics_to_json(mt).dump(); });

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_readonly("skipped", &TrainResult::skipped);

  py::class_<OpfSolution>(m, "OpfSolution")
      .def_readonly("x", &OpfSolution::x)
      .def_readonly("cost", &OpfSolution::cost)
      .def_readonly("max_residual", &OpfSolution::max_residual)
      .def_readonly("iterations", &OpfSolution::iterations)
      .def_readonly("converged", &OpfSolution::converged);

  m.def("parse_case", &parse_case, py::arg("text"), "parse MATPOWER case text");
  m.def("load_case", &load_case, py::arg("path"), "load a MATPOWER case file");
  m.def("build_admittance", &build_admittance);
  m.def("partition_variables", &partition_variables);
  m.def("nominal_loads", &nominal_loads);
  m.def(
      "solve_pf",
      [](const NetworkCase& net, const Dispatch& x, const LoadVector& phi) {
        const AdmittanceMatrix Y = build_admittance(net);
        const VariableIndex idx = partition_variables(net);
        return solve_pf(net, Y, idx, x, phi);
      },
      py::arg("net"), py::arg("dispatch"), py::arg("loads"));
  m.def(
      "constraint_values",
      [](const NetworkCase& net, const VoltageState& u, const LoadVector& phi) {
        const AdmittanceMatrix Y = build_admittance(net);
        const VariableIndex idx = partition_variables(net);
        return constraint_values(u, net, idx, Y, phi);
      },
      py::arg("net"), py::arg("state"), py::arg("loads"));
  m.def(
      "flow_sensitivity",
      [](const NetworkCase& net, const VoltageState& u) {
        const AdmittanceMatrix Y = build_admittance(net);
        const VariableIndex idx = partition_variables(net);
        return sensitivity(u, Y, idx);
      },
      py::arg("net"), py::arg("state"), "state sensitivity d u / d x at a solved point");
  m.def(
      "init_policy",
      [](const NetworkCase& net, PolicyMode mode, std::uint64_t seed) {
        return init_policy(net, partition_variables(net), mode, seed);
      },
      py::arg("net"), py::arg("mode") = PolicyMode::Full, py::arg("seed") = 1);
  m.def("forward", &forward, py::arg("params"), py::arg("loads"));
  m.def("policy_jacobian", &policy_jacobian, py::arg("params"), py::arg("loads"));
  m.def("logistic", &logistic, py::arg("x"), py::arg("epsilon"));
  m.def("logistic_grad", &logistic_grad, py::arg("x"), py::arg("epsilon"));
  m.def("sample_loads", &sample_loads, py::arg("net"), py::arg("radius"), py::arg("count"),
        py::arg("seed"));
  m.def("train", &train, py::arg("net"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def(
      "evaluate",
      [](const PolicyParams& params, const NetworkCase& net,
         const std::vector<LoadVector>& samples, int threads) {
        return evaluate(params, net, samples, PfSettings{}, threads);
      },
      py::arg("params"), py::arg("net"), py::arg("samples"), py::arg("threads") = 0,
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "make_split",
      [](const NetworkCase& net, double radius, int k_train, int k_test, std::uint64_t seed) {
        const SampleSplit split = make_split(net, radius, k_train, k_test, seed);
        return py::make_tuple(split.train, split.test);
      },
      py::arg("net"), py::arg("radius"), py::arg("k_train"), py::arg("k_test"), py::arg("seed"));
  m.def(
      "solve_opf",
      [](const NetworkCase& net, const LoadVector& phi) {
        const AdmittanceMatrix Y = build_admittance(net);
        const VariableIndex idx = partition_variables(net);
        return solve_opf(net, Y, idx, phi);
      },
      py::arg("net"), py::arg("loads"), py::call_guard<py::gil_scoped_release>());
  m.def("save_policy", &save_policy, py::arg("params"), py::arg("path"));
  m.def("load_policy", &load_policy, py::arg("path"));
}
