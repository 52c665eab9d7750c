#pragma once

// Run configuration: a TOML-style sectioned key/value file (or JSON with the
// same shape), validated against a fixed schema. Keys carry their unit as a
// suffix (_per_h, _days, _h, _M, ...); unknown keys are errors.

#include "neuroagg/connectome.hpp"
#include "neuroagg/kinetics.hpp"
#include "neuroagg/optimizer.hpp"
#include "neuroagg/therapy.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace neuroagg::config {

using Json = nlohmann::ordered_json;

// Parse TOML subset into a JSON object of sections. Errors name the line.
Json parse_toml(const std::string& text);

struct ModelSection {
  ModelVariant variant = ModelVariant::defaults(ModelTag::InVivoConstMonomer);
  KineticParameters params;
  std::size_t N_max = 200;
  double seed_p2 = 0.0;  // M, initial p_2 (in vivo / network seed node)
  bool k_n_zeroed_given = false;  // network runs default to k_n = 0 otherwise
  bool rescale_keep_k_n = false;  // k_n numerically unchanged by rescale_c
};

struct SolverSection {
  double rel_tol = 1e-8;
  std::optional<double> abs_tol;  // default 1e-14 m_0 in the integration frame
  double t_end_h = 10.0;
  std::optional<double> output_step_h;
  std::size_t max_steps = 50'000'000;
  std::string method = "auto";  // auto | explicit | rosenbrock
};

struct NetworkSection {
  std::string edges;     // path; empty when a generator is used
  std::string metadata;  // optional path
  std::string generator; // small_world | path | star
  std::size_t V = 0;
  std::size_t k = 4;
  double rewire_p = 0.1;
  std::uint64_t seed = 1;
  double weight = 1.0;
  std::vector<double> leaf_weights;
  std::string diffusion = "constant";  // constant | cube_inverse
  double rho_per_h = 0.01;
  std::string seed_node = "0";
  double invasion_fraction = 0.1;
  std::string invasion_reference = "m_0";  // m_0 | M_2
  std::vector<std::size_t> sizes;          // per-size long dump
};

struct TherapySection {
  therapy::DrugSpec drug;
  std::optional<therapy::DosingRegime> regime;
};

struct OptimizerSection {
  std::optional<double> C_max;
  std::vector<double> B_grid_days;
  std::vector<double> lambda_grid_per_h;
  optimizer::Settings settings;
};

struct AnalysisSection {
  std::vector<double> delta_k = {0.25, 0.5, 0.75, 1.0};
  std::size_t existence_N = 20000;
  bool numeric = true;
};

struct OutputSection {
  std::vector<std::size_t> sizes;  // p_i columns in simulate CSV
};

struct RunConfig {
  ModelSection model;
  std::optional<ClearanceSpec> clearance;
  SolverSection solver;
  std::optional<NetworkSection> network;
  std::optional<TherapySection> therapy;
  std::optional<OptimizerSection> optimizer;
  AnalysisSection analysis;
  OutputSection output;
};

// text: TOML subset, or JSON when the first non-blank character is '{'.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Defaults-expanded config in the same schema; parse_config(effective) == cfg.
Json effective_config(const RunConfig& cfg);

}  // namespace neuroagg::config
