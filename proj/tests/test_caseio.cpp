#include <fstream>
#include <sstream>

#include "ccopf/network.hpp"
#include "ccopf/sha256.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace ccopf;
using namespace ccopf::testing;

static std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST_CASE("two-bus fixture parses to the expected shape") {
  const NetworkCase net = load_fixture("case2.m");
  CHECK(net.n_bus() == 2);
  CHECK(net.branches.size() == 1);
  CHECK(net.generators.size() == 1);
  CHECK(net.buses[0].type == BusType::Slack);
  CHECK(net.buses[1].type == BusType::Load);
  CHECK(net.buses[1].p_d == doctest::Approx(0.5));
  CHECK(net.branches[0].rate == doctest::Approx(2.5));
  // cost stored against p.u. power
  CHECK(net.gen_cost(0, 1.0) == doctest::Approx(0.1 * 100 * 100 + 20 * 100));
}

TEST_CASE("14-bus fixture has the counts its tables carry") {
  const NetworkCase net = load_fixture("case14.m");
  CHECK(net.n_bus() == 14);
  CHECK(net.generators.size() == 5);
  CHECK(net.branches.size() == 20);
  CHECK(net.buses[8].bs == doctest::Approx(0.19));  // bus 9 shunt
  CHECK(net.branches[7].tap == doctest::Approx(0.978));
}

TEST_CASE("missing tables and bad cost models are rejected") {
  std::string text = slurp(data_path("case14.m"));

  SUBCASE("generator table deleted") {
    const size_t at = text.find("mpc.gen =");
    std::string cut = text.substr(0, at) + text.substr(text.find("];", at) + 2);
    CHECK_THROWS_WITH_AS(parse_case(cut), "missing generator table", ParseError);
  }
  SUBCASE("piecewise-linear cost") {
    const size_t at = text.find("mpc.gencost");
    std::string pwl = text.substr(0, at) +
                      "mpc.gencost = [\n"
                      "  1 0 0 2 0 0 100 1000;\n"
                      "  1 0 0 2 0 0 100 1000;\n"
                      "  1 0 0 2 0 0 100 1000;\n"
                      "  1 0 0 2 0 0 100 1000;\n"
                      "  1 0 0 2 0 0 100 1000;\n"
                      "];\n";
    CHECK_THROWS_AS(parse_case(pwl), ValidationError);
  }
  SUBCASE("duplicate slack") {
    std::string dup = text;
    const size_t at = dup.find("2\t2\t21.7");
    REQUIRE(at != std::string::npos);
    dup[at + 2] = '3';  // bus 2 becomes a second reference bus
    CHECK_THROWS_AS(parse_case(dup), ValidationError);
  }
  SUBCASE("dangling branch endpoint") {
    std::string dangle = text;
    const size_t at = dangle.find("13\t14\t0.17093");
    REQUIRE(at != std::string::npos);
    dangle.replace(at, 5, "13\t99\t");
    CHECK_THROWS_AS(parse_case(dangle), ValidationError);
  }
}

TEST_CASE("zero rate column maps to an unlimited flow") {
  std::string text = slurp(data_path("case2.m"));
  const std::string row = "1\t2\t0\t0.1\t0\t250";
  const size_t at = text.find(row);
  REQUIRE(at != std::string::npos);
  std::string unlimited = text;
  unlimited.replace(at, row.size(), "1\t2\t0\t0.1\t0\t0");
  const NetworkCase net = parse_case(unlimited);
  CHECK(std::isinf(net.branches[0].rate));
}

TEST_CASE("out-of-service rows are dropped") {
  std::string text = slurp(data_path("case6ww.m"));
  const std::string row = "4\t5\t0.2\t0.4\t0.08\t20\t20\t20\t0\t0\t1";
  const size_t at = text.find(row);
  REQUIRE(at != std::string::npos);
  std::string off = text;
  off.replace(at, row.size(), "4\t5\t0.2\t0.4\t0.08\t20\t20\t20\t0\t0\t0");
  const NetworkCase net = parse_case(off);
  CHECK(net.branches.size() == 10);
}

TEST_CASE("parse -> json -> parse round-trips to an identical case") {
  for (const char* name : {"case2.m", "case6ww.m", "case14.m"}) {
    const NetworkCase net = load_fixture(name);
    const NetworkCase back = case_from_json(case_to_json(net));
    CHECK(back == net);
  }
}

TEST_CASE("admittance matches the complex pi-model oracle entrywise") {
  for (const char* name : {"case2.m", "case6ww.m", "case14.m"}) {
    const NetworkCase net = load_fixture(name);
    const AdmittanceMatrix Y = build_admittance(net);
    const Eigen::MatrixXcd oracle = admittance_oracle(net);
    CHECK((Y.G - oracle.real()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((Y.B - oracle.imag()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("single lossless branch gives G12 = 0, B12 = +10") {
  const NetworkCase net = load_fixture("case2.m");
  const AdmittanceMatrix Y = build_admittance(net);
  CHECK(Y.G(0, 1) == doctest::Approx(0.0));
  CHECK(Y.B(0, 1) == doctest::Approx(10.0));
}

TEST_CASE("row sums vanish without shunts and taps") {
  const NetworkCase net = strip_shunts(load_fixture("case14.m"), /*reset_taps=*/true);
  const AdmittanceMatrix Y = build_admittance(net);
  CHECK(Y.G.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(Y.B.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero-impedance branch is singular") {
  NetworkCase net = load_fixture("case2.m");
  net.branches[0].r = 0.0;
  net.branches[0].x = 0.0;
  CHECK_THROWS_AS(build_admittance(net), SingularityError);
}

TEST_CASE("variable partition dimensions") {
  SUBCASE("14-bus") {
    const VariableIndex idx = partition_variables(load_fixture("case14.m"));
    CHECK(idx.dim_x() == 9);
    CHECK(idx.dim_u() == 27);
    CHECK(idx.dim_phi() == 28);
    CHECK(idx.n_rows() == 2 * (5 - 1) + 4 + 2 * 9 + 2 * 20);
  }
  SUBCASE("two-bus: slack generator only") {
    const VariableIndex idx = partition_variables(load_fixture("case2.m"));
    CHECK(idx.dim_x() == 1);
    CHECK(idx.dim_u() == 3);
    CHECK(idx.n_gen() == 1);
    CHECK(idx.nonslack_gens.empty());
  }
  SUBCASE("dimension identities hold on every fixture") {
    for (const char* name : {"case2.m", "case6ww.m", "case14.m"}) {
      const NetworkCase net = load_fixture(name);
      const VariableIndex idx = partition_variables(net);
      CHECK(idx.dim_x() == 2 * idx.n_gen() - 1);
      CHECK(idx.dim_u() == 2 * idx.n_bus - 1);
      CHECK(idx.dim_phi() == 2 * idx.n_bus);
      CHECK(idx.n_gen() + idx.n_load() == idx.n_bus);
    }
  }
}

TEST_CASE("constraint rows follow the canonical ordering") {
  const NetworkCase net = load_fixture("case6ww.m");
  const VariableIndex idx = partition_variables(net);
  REQUIRE(idx.n_rows() == 2 * 2 + 4 + 2 * 3 + 2 * 11);
  CHECK(idx.rows[0].kind == ConstraintKind::GenReactive);
  CHECK(idx.rows[0].sign == 1.0);
  CHECK(idx.rows[1].sign == -1.0);
  CHECK(idx.rows[4].kind == ConstraintKind::SlackActive);
  CHECK(idx.rows[6].kind == ConstraintKind::SlackReactive);
  CHECK(idx.rows[8].kind == ConstraintKind::LoadVoltage);
  CHECK(idx.rows[14].kind == ConstraintKind::FlowFrom);
  CHECK(idx.rows[15].kind == ConstraintKind::FlowTo);
  // slack p bounds land in the limits vector
  CHECK(idx.rows[4].limit == doctest::Approx(2.0));
  CHECK(idx.rows[5].limit == doctest::Approx(-0.5));
}

TEST_CASE("a second unit on one bus is rejected") {
  std::string text = slurp(data_path("case6ww.m"));
  const std::string row = "\t3\t60\t0\t100\t-100\t1.07\t100\t1\t180\t45;";
  const size_t at = text.find(row);
  REQUIRE(at != std::string::npos);
  std::string doubled = text;
  doubled.insert(at + row.size(), "\n\t3\t10\t0\t50\t-50\t1.07\t100\t1\t90\t0;");
  // gencost rows must track the added generator row
  const size_t cost_at = doubled.find("2\t0\t0\t3\t0.00741\t10.833\t240;");
  REQUIRE(cost_at != std::string::npos);
  doubled.insert(doubled.find(';', cost_at) + 1, "\n\t2\t0\t0\t3\t0.01\t11\t100;");
  CHECK_THROWS_AS(parse_case(doubled), ValidationError);
}

TEST_CASE("sha256 matches the published test vectors") {
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex(std::string(1000, 'a')).size() == 64);
}
