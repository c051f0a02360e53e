#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hybridlv/chain.hpp"
#include "hybridlv/common.hpp"
#include "hybridlv/dynamics.hpp"

namespace hybridlv::io {

// Knobs consumed by the verification suites; every field has a default so
// scenario files only spell out what they change.
struct ProbeParams {
  int n_paths = 1000;
  int n_reps = 1000;
  std::vector<double> p_list{1.0};
  double delta = 0.05;
  double extinction_threshold = 1e-6;
  double escape_eps = 0.5;
  std::vector<double> radii{0.5, 0.25, 0.1};
  double t_snap = 0.0;  // 0 means the scenario horizon
  std::vector<double> pair_scales{0.5, 0.1, 0.05, 0.01};
  std::vector<double> moment_times;  // empty means an automatic grid
  std::vector<double> mixing_times{0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  double quad_horizon = 40.0;
  double occupation_horizon = 40.0;
};

// Fully resolved experiment description. States are 0-based here; the JSON
// schema is 1-based and conversion happens entirely in the parser.
struct Scenario {
  std::string name;
  int n_species = 0;
  chain::GeneratorSpec generator;  // fast regime generator
  chain::GeneratorSpec slow;       // slow part; zero generator when absent
  bool has_slow = false;
  std::vector<double> epsilon_list;  // empty: generator used unscaled
  dynamics::CoefficientTable coeffs;
  Vector x0;
  int alpha0 = 0;
  double horizon = 1.0;
  dynamics::SimScheme scheme;
  ProbeParams probes;
  std::string hash;

  // Generator actually driving simulations: the two-scale composition at
  // the first listed epsilon, or the plain generator when none is listed.
  chain::GeneratorSpec effective_generator() const;
  double epsilon() const { return epsilon_list.empty() ? 1.0 : epsilon_list[0]; }
};

// Parses and validates a scenario object. base_dir resolves generator file
// references. Throws SchemaError for structural problems and
// CompetitivenessViolation when some state's interaction matrix breaks
// a_ii > 0, a_ij >= 0.
Scenario parse_scenario(const nlohmann::json& j, const std::string& base_dir);

Scenario load_scenario(const std::string& path);

// Window generator from {"trunc_size", "tail_tol", "rows": [{from,to,rate}]}
// with 1-based states.
chain::GeneratorSpec generator_from_json(const nlohmann::json& j);

// Canonical normalized form: every default resolved, keys sorted. The
// scenario hash is computed over exactly this serialization.
nlohmann::json canonical_json(const Scenario& s);

// FNV-1a 64-bit over the canonical serialization, as 16 hex digits.
std::string scenario_hash_hex(const nlohmann::json& canonical);

}  // namespace hybridlv::io
