#include "ccopf/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace ccopf {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Strip MATLAB comments (% to end of line).
std::string strip_comments(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_comment = false;
  for (char c : text) {
    if (c == '%') in_comment = true;
    if (c == '\n') in_comment = false;
    out.push_back(in_comment ? ' ' : c);
  }
  return out;
}

// Locate "<key> = [ ... ];" and parse the bracket body as numeric rows.
// Rows are separated by ';' or newlines.
std::vector<std::vector<double>> parse_matrix(const std::string& text, const std::string& key,
                                              const std::string& missing_msg) {
  size_t pos = 0;
  size_t key_at = std::string::npos;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    // reject partial identifier matches such as mpc.gen inside mpc.gencost
    size_t after = pos + key.size();
    if (after < text.size() && (std::isalnum(static_cast<unsigned char>(text[after])) || text[after] == '_')) {
      pos = after;
      continue;
    }
    key_at = pos;
    break;
  }
  if (key_at == std::string::npos) throw ParseError(missing_msg);

  size_t eq = text.find('=', key_at);
  size_t open = text.find('[', eq == std::string::npos ? key_at : eq);
  size_t close = text.find(']', open == std::string::npos ? key_at : open);
  if (eq == std::string::npos || open == std::string::npos || close == std::string::npos)
    throw ParseError("malformed matrix for " + key);

  std::vector<std::vector<double>> result;
  std::vector<double> row;
  std::string token;
  auto flush_token = [&]() {
    if (token.empty()) return;
    try {
      size_t used = 0;
      double v = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      row.push_back(v);
    } catch (const std::exception&) {
      throw ParseError("bad numeric token '" + token + "' in " + key);
    }
    token.clear();
  };
  auto flush_row = [&]() {
    flush_token();
    if (!row.empty()) result.push_back(std::move(row));
    row.clear();
  };

  for (size_t i = open + 1; i < close; ++i) {
    char c = text[i];
    if (c == ';' || c == '\n') {
      flush_row();
    } else if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      flush_token();
    } else {
      token.push_back(c);
    }
  }
  flush_row();
  if (result.empty()) throw ParseError(missing_msg);
  return result;
}

double parse_scalar(const std::string& text, const std::string& key, const std::string& missing_msg) {
  size_t pos = text.find(key);
  if (pos == std::string::npos) throw ParseError(missing_msg);
  size_t eq = text.find('=', pos);
  size_t semi = text.find(';', eq == std::string::npos ? pos : eq);
  if (eq == std::string::npos || semi == std::string::npos) throw ParseError(missing_msg);
  try {
    return std::stod(text.substr(eq + 1, semi - eq - 1));
  } catch (const std::exception&) {
    throw ParseError("bad value for " + key);
  }
}

std::string parse_case_name(const std::string& text) {
  size_t pos = text.find("function");
  if (pos == std::string::npos) return "case";
  size_t eq = text.find('=', pos);
  if (eq == std::string::npos) return "case";
  std::istringstream is(text.substr(eq + 1, 128));
  std::string name;
  is >> name;
  for (char& c : name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') c = '_';
  return name.empty() ? "case" : name;
}

void validate(const NetworkCase& net) {
  if (net.base_mva <= 0.0) throw ValidationError("base MVA must be positive");
  int n = net.n_bus();
  int slack_count = 0;
  for (const BusRecord& b : net.buses) {
    if (b.type == BusType::Slack) ++slack_count;
    if (b.v_min > b.v_max) throw ValidationError("bus " + std::to_string(b.id) + " has v_min > v_max");
  }
  if (slack_count == 0) throw ValidationError("no slack bus");
  if (slack_count > 1) throw ValidationError("duplicate slack bus");

  std::vector<int> gens_at_bus(n, 0);
  for (const GenRecord& g : net.generators) {
    if (g.bus < 0 || g.bus >= n) throw ValidationError("generator references unknown bus");
    if (g.p_min > g.p_max || g.q_min > g.q_max)
      throw ValidationError("generator at bus " + std::to_string(net.buses[g.bus].id) + " has inverted limits");
    if (++gens_at_bus[g.bus] > 1)
      throw ValidationError("more than one generator at bus " + std::to_string(net.buses[g.bus].id));
    if (net.buses[g.bus].type == BusType::Load)
      throw ValidationError("generator at load bus " + std::to_string(net.buses[g.bus].id));
  }
  for (const BusRecord& b : net.buses) {
    int i = static_cast<int>(&b - net.buses.data());
    if (b.type != BusType::Load && gens_at_bus[i] == 0)
      throw ValidationError("generator bus " + std::to_string(b.id) + " hosts no in-service unit");
  }
  for (const BranchRecord& br : net.branches) {
    if (br.from < 0 || br.from >= n || br.to < 0 || br.to >= n)
      throw ValidationError("branch references unknown bus");
  }
}

}  // namespace

int NetworkCase::slack_bus() const {
  for (int i = 0; i < n_bus(); ++i)
    if (buses[i].type == BusType::Slack) return i;
  throw ValidationError("no slack bus");
}

NetworkCase parse_case(const std::string& raw) {
  const std::string text = strip_comments(raw);

  NetworkCase net;
  net.name = parse_case_name(text);
  net.base_mva = parse_scalar(text, "mpc.baseMVA", "missing baseMVA");
  const double base = net.base_mva;
  if (base <= 0.0) throw ValidationError("base MVA must be positive");

  auto bus_tab = parse_matrix(text, "mpc.bus", "missing bus table");
  auto gen_tab = parse_matrix(text, "mpc.gen", "missing generator table");
  auto branch_tab = parse_matrix(text, "mpc.branch", "missing branch table");
  auto cost_tab = parse_matrix(text, "mpc.gencost", "missing gencost table");

  std::vector<int> ext_to_int;  // via map below
  std::unordered_map<int, int> bus_index;
  for (const auto& row : bus_tab) {
    if (row.size() < 13) throw ParseError("bus row has fewer than 13 columns");
    BusRecord b;
    b.id = static_cast<int>(row[0]);
    int t = static_cast<int>(row[1]);
    if (t == 4) throw ValidationError("isolated bus " + std::to_string(b.id));
    b.type = (t == 3) ? BusType::Slack : (t == 2 ? BusType::Generator : BusType::Load);
    b.p_d = row[2] / base;
    b.q_d = row[3] / base;
    b.gs = row[4] / base;
    b.bs = row[5] / base;
    b.v_max = row[11];
    b.v_min = row[12];
    if (bus_index.count(b.id)) throw ValidationError("duplicate bus id " + std::to_string(b.id));
    bus_index[b.id] = net.n_bus();
    net.buses.push_back(b);
  }

  if (cost_tab.size() != gen_tab.size() && cost_tab.size() != 2 * gen_tab.size())
    throw ValidationError("gencost rows do not match generator rows");

  for (size_t i = 0; i < gen_tab.size(); ++i) {
    const auto& row = gen_tab[i];
    if (row.size() < 10) throw ParseError("generator row has fewer than 10 columns");
    if (static_cast<int>(row[7]) <= 0) continue;  // out of service
    GenRecord g;
    auto it = bus_index.find(static_cast<int>(row[0]));
    if (it == bus_index.end()) throw ValidationError("generator references unknown bus " + std::to_string(static_cast<int>(row[0])));
    g.bus = it->second;
    g.q_max = row[3] / base;
    g.q_min = row[4] / base;
    g.p_max = row[8] / base;
    g.p_min = row[9] / base;

    const auto& cost = cost_tab[i];
    if (cost.size() < 4) throw ParseError("gencost row has fewer than 4 columns");
    if (static_cast<int>(cost[0]) != 2) throw ValidationError("nonpolynomial cost model for generator row " + std::to_string(i + 1));
    int ncoef = static_cast<int>(cost[3]);
    if (ncoef > 3) throw ValidationError("polynomial cost degree above 2 for generator row " + std::to_string(i + 1));
    if (cost.size() < 4 + static_cast<size_t>(ncoef)) throw ParseError("gencost row is truncated");
    double c[3] = {0.0, 0.0, 0.0};  // c2, c1, c0
    for (int k = 0; k < ncoef; ++k) c[3 - ncoef + k] = cost[4 + k];
    // store against p in p.u.
    g.c2 = c[0] * base * base;
    g.c1 = c[1] * base;
    g.c0 = c[2];

    // a PQ bus hosting an in-service unit is treated as a generator bus
    if (net.buses[g.bus].type == BusType::Load) net.buses[g.bus].type = BusType::Generator;
    net.generators.push_back(g);
  }

  // generator-less PV buses behave as loads
  {
    std::vector<bool> has_gen(net.n_bus(), false);
    for (const GenRecord& g : net.generators) has_gen[g.bus] = true;
    for (BusRecord& b : net.buses)
      if (b.type == BusType::Generator && !has_gen[&b - net.buses.data()]) b.type = BusType::Load;
  }

  for (const auto& row : branch_tab) {
    if (row.size() < 11) throw ParseError("branch row has fewer than 11 columns");
    if (static_cast<int>(row[10]) <= 0) continue;  // out of service
    BranchRecord br;
    auto itf = bus_index.find(static_cast<int>(row[0]));
    auto itt = bus_index.find(static_cast<int>(row[1]));
    if (itf == bus_index.end() || itt == bus_index.end())
      throw ValidationError("branch references unknown bus");
    br.from = itf->second;
    br.to = itt->second;
    br.r = row[2];
    br.x = row[3];
    br.b_sh = row[4];
    br.rate = row[5] > 0.0 ? row[5] / base : kInf;  // 0 means unlimited
    br.tap = row[8] != 0.0 ? row[8] : 1.0;
    br.shift = row[9] * kPi / 180.0;
    net.branches.push_back(br);
  }

  validate(net);
  return net;
}

NetworkCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("case file not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str());
}

nlohmann::json case_to_json(const NetworkCase& net) {
  nlohmann::json j;
  j["name"] = net.name;
  j["base_mva"] = net.base_mva;
  for (const BusRecord& b : net.buses)
    j["buses"].push_back({{"id", b.id},
                          {"type", static_cast<int>(b.type)},
                          {"p_d", b.p_d},
                          {"q_d", b.q_d},
                          {"gs", b.gs},
                          {"bs", b.bs},
                          {"v_min", b.v_min},
                          {"v_max", b.v_max}});
  for (const BranchRecord& br : net.branches)
    j["branches"].push_back({{"from", br.from},
                             {"to", br.to},
                             {"r", br.r},
                             {"x", br.x},
                             {"b_sh", br.b_sh},
                             {"rate", br.rate == kInf ? -1.0 : br.rate},
                             {"tap", br.tap},
                             {"shift", br.shift}});
  for (const GenRecord& g : net.generators)
    j["generators"].push_back({{"bus", g.bus},
                               {"p_min", g.p_min},
                               {"p_max", g.p_max},
                               {"q_min", g.q_min},
                               {"q_max", g.q_max},
                               {"c2", g.c2},
                               {"c1", g.c1},
                               {"c0", g.c0}});
  return j;
}

NetworkCase case_from_json(const nlohmann::json& j) {
  NetworkCase net;
  net.name = j.at("name").get<std::string>();
  net.base_mva = j.at("base_mva").get<double>();
  for (const auto& jb : j.at("buses")) {
    BusRecord b;
    b.id = jb.at("id").get<int>();
    b.type = static_cast<BusType>(jb.at("type").get<int>());
    b.p_d = jb.at("p_d").get<double>();
    b.q_d = jb.at("q_d").get<double>();
    b.gs = jb.at("gs").get<double>();
    b.bs = jb.at("bs").get<double>();
    b.v_min = jb.at("v_min").get<double>();
    b.v_max = jb.at("v_max").get<double>();
    net.buses.push_back(b);
  }
  for (const auto& jb : j.at("branches")) {
    BranchRecord br;
    br.from = jb.at("from").get<int>();
    br.to = jb.at("to").get<int>();
    br.r = jb.at("r").get<double>();
    br.x = jb.at("x").get<double>();
    br.b_sh = jb.at("b_sh").get<double>();
    double rate = jb.at("rate").get<double>();
    br.rate = rate < 0.0 ? kInf : rate;
    br.tap = jb.at("tap").get<double>();
    br.shift = jb.at("shift").get<double>();
    net.branches.push_back(br);
  }
  for (const auto& jg : j.at("generators")) {
    GenRecord g;
    g.bus = jg.at("bus").get<int>();
    g.p_min = jg.at("p_min").get<double>();
    g.p_max = jg.at("p_max").get<double>();
    g.q_min = jg.at("q_min").get<double>();
    g.q_max = jg.at("q_max").get<double>();
    g.c2 = jg.at("c2").get<double>();
    g.c1 = jg.at("c1").get<double>();
    g.c0 = jg.at("c0").get<double>();
    net.generators.push_back(g);
  }
  validate(net);
  return net;
}

BranchTwoPort branch_two_port(const BranchRecord& br) {
  if (br.r == 0.0 && br.x == 0.0)
    throw SingularityError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                           " has zero series impedance");
  const double zmag2 = br.r * br.r + br.x * br.x;
  const double gs = br.r / zmag2;
  const double bs = -br.x / zmag2;
  const double bc = br.b_sh / 2.0;
  const double t2 = br.tap * br.tap;
  const double cs = std::cos(br.shift), sn = std::sin(br.shift);

  BranchTwoPort y;
  y.gff = gs / t2;
  y.bff = (bs + bc) / t2;
  // Yft = -ys / (tap * e^{-j shift}),  Ytf = -ys / (tap * e^{+j shift})
  y.gft = -(gs * cs - bs * sn) / br.tap;
  y.bft = -(bs * cs + gs * sn) / br.tap;
  y.gtf = -(gs * cs + bs * sn) / br.tap;
  y.btf = -(bs * cs - gs * sn) / br.tap;
  y.gtt = gs;
  y.btt = bs + bc;
  return y;
}

AdmittanceMatrix build_admittance(const NetworkCase& net) {
  const int n = net.n_bus();
  AdmittanceMatrix Y{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  for (const BranchRecord& br : net.branches) {
    const BranchTwoPort y = branch_two_port(br);
    Y.G(br.from, br.from) += y.gff;
    Y.B(br.from, br.from) += y.bff;
    Y.G(br.from, br.to) += y.gft;
    Y.B(br.from, br.to) += y.bft;
    Y.G(br.to, br.from) += y.gtf;
    Y.B(br.to, br.from) += y.btf;
    Y.G(br.to, br.to) += y.gtt;
    Y.B(br.to, br.to) += y.btt;
  }
  for (int i = 0; i < n; ++i) {
    Y.G(i, i) += net.buses[i].gs;
    Y.B(i, i) += net.buses[i].bs;
  }
  return Y;
}

VariableIndex partition_variables(const NetworkCase& net) {
  validate(net);
  VariableIndex idx;
  idx.n_bus = net.n_bus();
  idx.slack = net.slack_bus();

  for (int g = 0; g < static_cast<int>(net.generators.size()); ++g) {
    idx.gen_bus.push_back(net.generators[g].bus);
    if (net.generators[g].bus == idx.slack)
      idx.slack_gen = g;
    else
      idx.nonslack_gens.push_back(g);
  }
  for (int b = 0; b < idx.n_bus; ++b)
    if (net.buses[b].type == BusType::Load) idx.load_bus.push_back(b);

  // box on x: voltage setpoint bounds at generator buses, then p_g bounds
  idx.x_lo.resize(idx.dim_x());
  idx.x_hi.resize(idx.dim_x());
  for (int g = 0; g < idx.n_gen(); ++g) {
    idx.x_lo[idx.x_vset(g)] = net.buses[idx.gen_bus[g]].v_min;
    idx.x_hi[idx.x_vset(g)] = net.buses[idx.gen_bus[g]].v_max;
  }
  for (size_t j = 0; j < idx.nonslack_gens.size(); ++j) {
    const GenRecord& g = net.generators[idx.nonslack_gens[j]];
    idx.x_lo[idx.x_pg(static_cast<int>(j))] = g.p_min;
    idx.x_hi[idx.x_pg(static_cast<int>(j))] = g.p_max;
  }

  // constraint rows: q^g per non-slack generator, slack p^g and q^g,
  // load-bus voltages (all as upper/lower pairs), then one-sided squared
  // flow limits per branch end
  for (int g : idx.nonslack_gens) {
    idx.rows.push_back({ConstraintKind::GenReactive, g, +1.0, net.generators[g].q_max});
    idx.rows.push_back({ConstraintKind::GenReactive, g, -1.0, -net.generators[g].q_min});
  }
  const GenRecord& sg = net.generators[idx.slack_gen];
  idx.rows.push_back({ConstraintKind::SlackActive, idx.slack_gen, +1.0, sg.p_max});
  idx.rows.push_back({ConstraintKind::SlackActive, idx.slack_gen, -1.0, -sg.p_min});
  idx.rows.push_back({ConstraintKind::SlackReactive, idx.slack_gen, +1.0, sg.q_max});
  idx.rows.push_back({ConstraintKind::SlackReactive, idx.slack_gen, -1.0, -sg.q_min});
  for (int b : idx.load_bus) {
    idx.rows.push_back({ConstraintKind::LoadVoltage, b, +1.0, net.buses[b].v_max});
    idx.rows.push_back({ConstraintKind::LoadVoltage, b, -1.0, -net.buses[b].v_min});
  }
  for (int e = 0; e < static_cast<int>(net.branches.size()); ++e) {
    const double f2 = net.branches[e].rate * net.branches[e].rate;
    idx.rows.push_back({ConstraintKind::FlowFrom, e, +1.0, f2});
    idx.rows.push_back({ConstraintKind::FlowTo, e, +1.0, f2});
  }
  return idx;
}

Eigen::VectorXd VariableIndex::limits() const {
  Eigen::VectorXd lim(n_rows());
  for (int i = 0; i < n_rows(); ++i) lim[i] = rows[i].limit;
  return lim;
}

}  // namespace ccopf
