#include <doctest.h>

#include "neuroagg/config.hpp"

#include <string>

using namespace neuroagg;
using namespace neuroagg::config;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("toml subset") {
  const auto j = parse_toml("# top\n[a]\nx = 1_000  # trailing\ny = \"s#t\"\nz = [1, 2.5,\n  3]\nw = true\n");
  CHECK(j["a"]["x"] == 1000);
  CHECK(j["a"]["y"] == "s#t");
  CHECK(j["a"]["z"].size() == 3);
  CHECK(j["a"]["w"] == true);
  CHECK_THROWS_AS(parse_toml("[a]\nx = 1\nx = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_toml("[a]\nx = \"open\n"), ConfigError);
}

TEST_CASE("units are converted on read") {
  const auto c = parse_config(
      "[model]\nvariant = \"in_vivo\"\nm_0_uM = 2\nN_max = 50\n"
      "[clearance]\nfamily = \"constant\"\nlambda_per_day = 48\n"
      "[solver]\nt_end_days = 2\nmethod = \"rosenbrock\"\n");
  CHECK(c.model.params.m_0 == doctest::Approx(2e-6));
  CHECK(c.model.N_max == 50);
  CHECK(std::get<clearance::Constant>(*c.clearance).lambda == doctest::Approx(2.0));
  CHECK(c.solver.t_end_h == 48.0);
  CHECK(c.solver.method == "rosenbrock");

  const auto d = parse_config("[dosing]\nlambda_drug_per_h = 5\nA_per_h = 1\nB_h = 12\nlambda_a_per_h = 10\nt_max_days = 28\n");
  REQUIRE(d.therapy);
  REQUIRE(d.therapy->regime);
  CHECK(d.therapy->regime->A == 24.0);  // per day
  CHECK(d.therapy->regime->B == 0.5);   // days
}

TEST_CASE("errors name the offending line") {
  CHECK(error_of("[model]\nN_max = 10\nbogus = 1\n").find("line 3") != std::string::npos);
  CHECK(error_of("[model]\nN_max = 10\n[nowhere]\nx = 1\n").find("unknown section") != std::string::npos);
  const auto e = error_of("[solver]\nrel_tol = 1e-6\nt_end_weeks = 3\n");
  CHECK(e.find("line 3") != std::string::npos);
  CHECK(e.find("unit suffix") != std::string::npos);
  CHECK(error_of("[solver]\nmethod = \"implicit\"\n").find("line 2") != std::string::npos);
  CHECK(error_of("[model]\nN_max = -4\n").find("N_max") != std::string::npos);
  CHECK_FALSE(error_of("[model]\nN_max = 10\n").size());
}

TEST_CASE("json input with the same shape") {
  const auto c = parse_config(R"({"model": {"N_max": 30, "k_n_zeroed": true}, "solver": {"t_end_h": 3}})");
  CHECK(c.model.N_max == 30);
  CHECK(c.model.variant.k_n_zeroed);
  CHECK(c.solver.t_end_h == 3.0);
}

TEST_CASE("effective config round trips") {
  for (const char* text : {
           "[model]\nrescale_c = 1e6\nrescale_keep_k_n = true\nvariant = \"dynamic\"\n"
           "[clearance]\nfamily = \"dynamic\"\nlambda_init_per_h = [11000]\nmu_per_h = [9000]\n"
           "beta_per_M_per_h = [1e17]\n",
           "[network]\ngenerator = \"small_world\"\nV = 20\nseed = 5\ndiffusion = \"cube_inverse\"\n"
           "invasion_reference = \"M_2\"\n[clearance]\nfamily = \"constant\"\nlambda_per_h = 9000\n",
           "[dosing]\nlambda_a_per_h = 10\nA_per_day = 1\nt_max_days = 28\n"
           "[optimizer]\nC_max = 100\nB_grid_days = [0.2, 1]\n",
       }) {
    const auto c = parse_config(text);
    const auto j = effective_config(c);
    const auto again = effective_config(parse_config(j.dump()));
    CHECK(j == again);
  }
  const auto c = parse_config("[model]\nrescale_c = 1e6\nrescale_keep_k_n = true\n");
  CHECK(c.model.rescale_keep_k_n);
  CHECK(effective_config(c)["model"]["rescale_keep_k_n"] == true);
}
