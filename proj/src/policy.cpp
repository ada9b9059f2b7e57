#include "ccopf/policy.hpp"

#include <cmath>
#include <fstream>

#include "ccopf/rng.hpp"

namespace ccopf {

namespace {

// flat layout: vec(W1) | b1 | vec(W2) | b2 | vec(W3) | b3, column-major
struct Offsets {
  int w1, bias1, w2, bias2, w3, bias3, total;
};

Offsets offsets(const PolicyParams& p) {
  Offsets o;
  o.w1 = 0;
  o.bias1 = o.w1 + p.input_dim * p.hidden_dim;
  o.w2 = o.bias1 + p.hidden_dim;
  o.bias2 = o.w2 + p.hidden_dim * p.hidden_dim;
  o.w3 = o.bias2 + p.hidden_dim;
  o.bias3 = o.w3 + p.hidden_dim * p.output_dim;
  o.total = o.bias3 + p.output_dim;
  return o;
}

void freeze_agc_rows(const PolicyParams& p, Eigen::MatrixXd& gW3) {
  if (p.mode == PolicyMode::Agc) gW3.topRows(p.n_gen()).setZero();
}

}  // namespace

int PolicyParams::n_params() const { return offsets(*this).total; }

Eigen::VectorXd PolicyParams::flatten() const {
  const Offsets o = offsets(*this);
  Eigen::VectorXd w(o.total);
  w.segment(o.w1, W1.size()) = Eigen::Map<const Eigen::VectorXd>(W1.data(), W1.size());
  w.segment(o.bias1, b1.size()) = b1;
  w.segment(o.w2, W2.size()) = Eigen::Map<const Eigen::VectorXd>(W2.data(), W2.size());
  w.segment(o.bias2, b2.size()) = b2;
  w.segment(o.w3, W3.size()) = Eigen::Map<const Eigen::VectorXd>(W3.data(), W3.size());
  w.segment(o.bias3, b3.size()) = b3;
  return w;
}

void PolicyParams::unflatten(const Eigen::VectorXd& w) {
  const Offsets o = offsets(*this);
  W1 = Eigen::Map<const Eigen::MatrixXd>(w.data() + o.w1, hidden_dim, input_dim);
  b1 = w.segment(o.bias1, hidden_dim);
  W2 = Eigen::Map<const Eigen::MatrixXd>(w.data() + o.w2, hidden_dim, hidden_dim);
  b2 = w.segment(o.bias2, hidden_dim);
  W3 = Eigen::Map<const Eigen::MatrixXd>(w.data() + o.w3, output_dim, hidden_dim);
  b3 = w.segment(o.bias3, output_dim);
  if (mode == PolicyMode::Agc) W3.topRows(n_gen()).setZero();
}

PolicyParams init_policy(const NetworkCase& net, const VariableIndex& idx, PolicyMode mode,
                         std::uint64_t seed) {
  PolicyParams p;
  p.mode = mode;
  p.n_bus = idx.n_bus;
  p.input_dim = mode == PolicyMode::Agc ? 1 : idx.dim_phi();
  p.hidden_dim = std::max((p.input_dim + 1) / 2, 4);
  p.output_dim = idx.dim_x();
  p.seed = seed;
  p.case_name = net.name;
  p.mid = 0.5 * (idx.x_hi + idx.x_lo);
  p.half = 0.5 * (idx.x_hi - idx.x_lo);

  // raw features; identity standardization kept for checkpoint stability
  p.in_center = Eigen::VectorXd::Zero(p.input_dim);
  p.in_scale = Eigen::VectorXd::Ones(p.input_dim);

  Rng rng(Rng::substream(seed, 0));
  auto draw = [&rng](Eigen::MatrixXd& m, int rows, int cols) {
    m.resize(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = rng.normal();
  };
  draw(p.W1, p.hidden_dim, p.input_dim);
  draw(p.W2, p.hidden_dim, p.hidden_dim);
  draw(p.W3, p.output_dim, p.hidden_dim);
  p.b1 = Eigen::VectorXd::Zero(p.hidden_dim);
  p.b2 = Eigen::VectorXd::Zero(p.hidden_dim);
  p.b3 = Eigen::VectorXd::Zero(p.output_dim);
  if (mode == PolicyMode::Agc) p.W3.topRows(p.n_gen()).setZero();
  return p;
}

Eigen::VectorXd policy_input(const PolicyParams& params, const LoadVector& phi) {
  Eigen::VectorXd in;
  if (params.mode == PolicyMode::Agc) {
    in.resize(1);
    in[0] = phi.p_d.sum();
  } else {
    in.resize(phi.p_d.size() + phi.q_d.size());
    in << phi.p_d, phi.q_d;
  }
  return (in - params.in_center).cwiseQuotient(params.in_scale);
}

PolicyTrace forward_trace(const PolicyParams& params, const LoadVector& phi) {
  PolicyTrace t;
  t.input = policy_input(params, phi);
  t.a1 = (params.W1 * t.input + params.b1).array().tanh();
  t.a2 = (params.W2 * t.a1 + params.b2).array().tanh();
  t.t_out = (params.W3 * t.a2 + params.b3).array().tanh();
  t.x = params.mid.array() + params.half.array() * t.t_out.array();
  return t;
}

Dispatch forward(const PolicyParams& params, const LoadVector& phi) {
  const PolicyTrace t = forward_trace(params, phi);
  Dispatch d;
  d.v_set = t.x.head(params.n_gen());
  d.p_g = t.x.tail(params.n_gen() - 1);
  return d;
}

Eigen::VectorXd policy_vjp(const PolicyParams& params, const PolicyTrace& trace,
                           const Eigen::VectorXd& seed) {
  const Eigen::ArrayXd dz3 = seed.array() * params.half.array() *
                             (1.0 - trace.t_out.array().square());
  Eigen::MatrixXd gW3 = dz3.matrix() * trace.a2.transpose();
  freeze_agc_rows(params, gW3);

  const Eigen::ArrayXd da2 = (params.W3.transpose() * dz3.matrix()).array();
  const Eigen::ArrayXd dz2 = da2 * (1.0 - trace.a2.array().square());
  const Eigen::MatrixXd gW2 = dz2.matrix() * trace.a1.transpose();

  const Eigen::ArrayXd da1 = (params.W2.transpose() * dz2.matrix()).array();
  const Eigen::ArrayXd dz1 = da1 * (1.0 - trace.a1.array().square());
  const Eigen::MatrixXd gW1 = dz1.matrix() * trace.input.transpose();

  const Offsets o = offsets(params);
  Eigen::VectorXd g(o.total);
  g.segment(o.w1, gW1.size()) = Eigen::Map<const Eigen::VectorXd>(gW1.data(), gW1.size());
  g.segment(o.bias1, params.hidden_dim) = dz1.matrix();
  g.segment(o.w2, gW2.size()) = Eigen::Map<const Eigen::VectorXd>(gW2.data(), gW2.size());
  g.segment(o.bias2, params.hidden_dim) = dz2.matrix();
  g.segment(o.w3, gW3.size()) = Eigen::Map<const Eigen::VectorXd>(gW3.data(), gW3.size());
  g.segment(o.bias3, params.output_dim) = dz3.matrix();
  return g;
}

Eigen::MatrixXd policy_jacobian(const PolicyParams& params, const LoadVector& phi) {
  const PolicyTrace trace = forward_trace(params, phi);
  Eigen::MatrixXd J(params.output_dim, params.n_params());
  Eigen::VectorXd seed = Eigen::VectorXd::Zero(params.output_dim);
  for (int i = 0; i < params.output_dim; ++i) {
    seed[i] = 1.0;
    J.row(i) = policy_vjp(params, trace, seed).transpose();
    seed[i] = 0.0;
  }
  return J;
}

nlohmann::json policy_to_json(const PolicyParams& params) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["mode"] = params.mode == PolicyMode::Agc ? "agc" : "full";
  j["input_dim"] = params.input_dim;
  j["hidden_dim"] = params.hidden_dim;
  j["output_dim"] = params.output_dim;
  j["n_bus"] = params.n_bus;
  j["seed"] = params.seed;
  j["case_name"] = params.case_name;
  auto dump = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  j["mid"] = dump(params.mid);
  j["half"] = dump(params.half);
  j["in_center"] = dump(params.in_center);
  j["in_scale"] = dump(params.in_scale);
  j["weights"] = dump(params.flatten());
  return j;
}

PolicyParams policy_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1)
    throw ValidationError("unsupported checkpoint format version");
  PolicyParams p;
  p.mode = j.at("mode").get<std::string>() == "agc" ? PolicyMode::Agc : PolicyMode::Full;
  p.input_dim = j.at("input_dim").get<int>();
  p.hidden_dim = j.at("hidden_dim").get<int>();
  p.output_dim = j.at("output_dim").get<int>();
  p.n_bus = j.at("n_bus").get<int>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.case_name = j.at("case_name").get<std::string>();
  auto read = [&j](const char* key) {
    const auto v = j.at(key).get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()).eval();
  };
  p.mid = read("mid");
  p.half = read("half");
  p.in_center = read("in_center");
  p.in_scale = read("in_scale");
  const Eigen::VectorXd w = read("weights");
  if (w.size() != p.n_params()) throw ValidationError("checkpoint weight count mismatch");
  p.unflatten(w);
  return p;
}

void save_policy(const PolicyParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << policy_to_json(params).dump(2) << "\n";
}

PolicyParams load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  return policy_from_json(j);
}

}  // namespace ccopf
