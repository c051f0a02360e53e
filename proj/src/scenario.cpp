#include "hybridlv/scenario.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "hybridlv/analysis.hpp"

namespace hybridlv::io {

namespace {

using nlohmann::json;

[[noreturn]] void schema_fail(const std::string& what) {
  throw SchemaError("scenario schema: " + what);
}

double require_number(const json& j, const std::string& key, double min_excl,
                      bool required, double fallback) {
  if (!j.contains(key)) {
    if (required) schema_fail("missing \"" + key + "\"");
    return fallback;
  }
  if (!j.at(key).is_number()) schema_fail("\"" + key + "\" must be a number");
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v) || !(v > min_excl)) {
    std::ostringstream msg;
    msg << "\"" << key << "\" must be finite and > " << min_excl;
    schema_fail(msg.str());
  }
  return v;
}

Vector read_vector(const json& j, int n, const std::string& key) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    std::ostringstream msg;
    msg << "\"" << key << "\" must be an array of " << n << " numbers";
    schema_fail(msg.str());
  }
  Vector v(n);
  for (int i = 0; i < n; ++i) {
    if (!j[i].is_number()) schema_fail("\"" + key + "\" must hold numbers");
    v[i] = j[i].get<double>();
    if (!std::isfinite(v[i])) schema_fail("\"" + key + "\" has a non-finite entry");
  }
  return v;
}

Matrix read_matrix(const json& j, int n, const std::string& key) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    std::ostringstream msg;
    msg << "\"" << key << "\" must be " << n << " rows";
    schema_fail(msg.str());
  }
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) {
    m.row(i) = read_vector(j[i], n, key).transpose();
  }
  return m;
}

std::vector<double> read_positive_list(const json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) {
    schema_fail("\"" + key + "\" must be a non-empty array");
  }
  std::vector<double> out;
  for (const auto& e : j) {
    if (!e.is_number()) schema_fail("\"" + key + "\" must hold numbers");
    const double v = e.get<double>();
    if (!std::isfinite(v) || !(v > 0.0)) {
      schema_fail("\"" + key + "\" entries must be positive");
    }
    out.push_back(v);
  }
  return out;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) schema_fail("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    schema_fail(std::string("invalid JSON in ") + path + ": " + e.what());
  }
  return j;
}

}  // namespace

chain::GeneratorSpec generator_from_json(const json& j) {
  if (!j.is_object()) schema_fail("generator must be an object");
  if (!j.contains("trunc_size") || !j.at("trunc_size").is_number_integer()) {
    schema_fail("generator needs an integer \"trunc_size\"");
  }
  const int n = j.at("trunc_size").get<int>();
  if (n <= 0) schema_fail("\"trunc_size\" must be >= 1");
  const double tail_tol =
      j.contains("tail_tol") ? j.at("tail_tol").get<double>() : 0.0;
  if (!(tail_tol >= 0.0)) schema_fail("\"tail_tol\" must be >= 0");

  std::vector<std::vector<chain::RateEntry>> rows(n);
  if (!j.contains("rows") || !j.at("rows").is_array()) {
    schema_fail("generator needs a \"rows\" array");
  }
  for (const auto& r : j.at("rows")) {
    if (!r.is_object() || !r.contains("from") || !r.contains("to") ||
        !r.contains("rate") || !r.at("from").is_number_integer() ||
        !r.at("to").is_number_integer() || !r.at("rate").is_number()) {
      schema_fail("each generator row needs integer from/to and numeric rate");
    }
    const int from = r.at("from").get<int>();
    const int to = r.at("to").get<int>();
    const double rate = r.at("rate").get<double>();
    if (from < 1) schema_fail("generator \"from\" states are 1-based");
    if (from > n) continue;  // rate out of a truncated state: not retained
    // 1-based in files; out-of-window targets stay out of the window after
    // the shift and are charged to the tail by the builder.
    rows[from - 1].push_back({to - 1, rate});
  }
  return chain::build_generator(rows, n, tail_tol);
}

chain::GeneratorSpec Scenario::effective_generator() const {
  if (epsilon_list.empty()) return generator;
  return chain::compose_two_time_scale(generator, slow, epsilon_list[0]);
}

Scenario parse_scenario(const json& j, const std::string& base_dir) {
  if (!j.is_object()) schema_fail("top level must be an object");
  Scenario s;

  s.name = j.contains("name") ? j.at("name").get<std::string>() : "unnamed";

  if (!j.contains("n_species") || !j.at("n_species").is_number_integer()) {
    schema_fail("missing integer \"n_species\"");
  }
  s.n_species = j.at("n_species").get<int>();
  if (s.n_species < 1) schema_fail("\"n_species\" must be >= 1");

  auto resolve_generator = [&](const json& g) {
    if (g.is_string()) {
      std::string path = g.get<std::string>();
      if (!path.empty() && path[0] != '/') path = base_dir + "/" + path;
      return generator_from_json(load_json_file(path));
    }
    return generator_from_json(g);
  };

  if (!j.contains("generator")) schema_fail("missing \"generator\"");
  try {
    s.generator = resolve_generator(j.at("generator"));
  } catch (const NegativeRate& e) {
    schema_fail(e.what());
  }
  const int n_states = s.generator.size();

  if (j.contains("slow_generator")) {
    try {
      s.slow = resolve_generator(j.at("slow_generator"));
    } catch (const NegativeRate& e) {
      schema_fail(e.what());
    }
    if (s.slow.size() != n_states) {
      schema_fail("slow generator window differs from the fast one");
    }
    s.has_slow = true;
  } else {
    s.slow = chain::GeneratorSpec::zero(n_states);
  }

  if (j.contains("epsilon") && j.contains("epsilon_list")) {
    schema_fail("give either \"epsilon\" or \"epsilon_list\", not both");
  }
  if (j.contains("epsilon")) {
    const double e = require_number(j, "epsilon", 0.0, true, 0.0);
    s.epsilon_list = {e};
  } else if (j.contains("epsilon_list")) {
    s.epsilon_list = read_positive_list(j.at("epsilon_list"), "epsilon_list");
  }

  if (!j.contains("x0")) schema_fail("missing \"x0\"");
  s.x0 = read_vector(j.at("x0"), s.n_species, "x0");
  for (int i = 0; i < s.n_species; ++i) {
    if (!(s.x0[i] > 0.0)) schema_fail("\"x0\" entries must be positive");
  }

  if (j.contains("alpha0")) {
    if (!j.at("alpha0").is_number_integer()) {
      schema_fail("\"alpha0\" must be an integer");
    }
    const int a = j.at("alpha0").get<int>();
    if (a < 1 || a > n_states) schema_fail("\"alpha0\" outside the window");
    s.alpha0 = a - 1;
  }

  s.horizon = require_number(j, "horizon", 0.0, true, 0.0);

  if (j.contains("scheme")) {
    const json& sch = j.at("scheme");
    if (!sch.is_object()) schema_fail("\"scheme\" must be an object");
    s.scheme.dt = require_number(sch, "dt", 0.0, false, s.scheme.dt);
    s.scheme.log_clamp =
        require_number(sch, "log_clamp", 0.0, false, s.scheme.log_clamp);
  }

  if (!j.contains("coefficients") || !j.at("coefficients").is_array()) {
    schema_fail("missing \"coefficients\" array");
  }
  std::vector<Vector> bs(n_states), sigmas(n_states);
  std::vector<Matrix> as(n_states);
  std::vector<char> have(n_states, 0);
  Vector default_b;
  Matrix default_a;
  Vector default_sigma;
  bool have_default = false;
  for (const auto& c : j.at("coefficients")) {
    if (!c.is_object() || !c.contains("b") || !c.contains("a") ||
        !c.contains("sigma")) {
      schema_fail("each coefficient entry needs b, a, sigma");
    }
    const Vector b = read_vector(c.at("b"), s.n_species, "b");
    const Matrix a = read_matrix(c.at("a"), s.n_species, "a");
    const Vector sg = read_vector(c.at("sigma"), s.n_species, "sigma");
    if (c.contains("state") && c.at("state").is_string()) {
      if (c.at("state").get<std::string>() != "all") {
        schema_fail("\"state\" must be an integer or \"all\"");
      }
      default_b = b;
      default_a = a;
      default_sigma = sg;
      have_default = true;
    } else if (c.contains("state") && c.at("state").is_number_integer()) {
      const int st = c.at("state").get<int>();
      if (st < 1 || st > n_states) {
        schema_fail("coefficient \"state\" outside the window");
      }
      bs[st - 1] = b;
      as[st - 1] = a;
      sigmas[st - 1] = sg;
      have[st - 1] = 1;
    } else {
      schema_fail("each coefficient entry needs \"state\"");
    }
  }
  for (int k = 0; k < n_states; ++k) {
    if (!have[k]) {
      if (!have_default) {
        std::ostringstream msg;
        msg << "state " << (k + 1) << " has no coefficients and no \"all\" "
            << "entry is given";
        schema_fail(msg.str());
      }
      bs[k] = default_b;
      as[k] = default_a;
      sigmas[k] = default_sigma;
    }
  }
  s.coeffs = dynamics::make_coefficients(std::move(bs), std::move(as),
                                         std::move(sigmas));

  if (j.contains("probes")) {
    const json& p = j.at("probes");
    if (!p.is_object()) schema_fail("\"probes\" must be an object");
    ProbeParams& pp = s.probes;
    if (p.contains("n_paths")) {
      if (!p.at("n_paths").is_number_integer() ||
          p.at("n_paths").get<int>() < 1) {
        schema_fail("\"n_paths\" must be a positive integer");
      }
      pp.n_paths = p.at("n_paths").get<int>();
    }
    if (p.contains("n_reps")) {
      if (!p.at("n_reps").is_number_integer() ||
          p.at("n_reps").get<int>() < 1) {
        schema_fail("\"n_reps\" must be a positive integer");
      }
      pp.n_reps = p.at("n_reps").get<int>();
    }
    if (p.contains("p_list")) {
      pp.p_list = read_positive_list(p.at("p_list"), "p_list");
    }
    pp.delta = require_number(p, "delta", 0.0, false, pp.delta);
    if (!(pp.delta < 1.0)) schema_fail("\"delta\" must lie in (0, 1)");
    pp.extinction_threshold = require_number(p, "extinction_threshold", 0.0,
                                             false, pp.extinction_threshold);
    pp.escape_eps =
        require_number(p, "escape_eps", 0.0, false, pp.escape_eps);
    if (p.contains("radii")) {
      pp.radii = read_positive_list(p.at("radii"), "radii");
    }
    pp.t_snap = require_number(p, "t_snap", 0.0, false,
                               pp.t_snap == 0.0 ? s.horizon : pp.t_snap);
    if (p.contains("pair_scales")) {
      pp.pair_scales = read_positive_list(p.at("pair_scales"), "pair_scales");
    }
    if (p.contains("moment_times")) {
      pp.moment_times =
          read_positive_list(p.at("moment_times"), "moment_times");
    }
    if (p.contains("mixing_times")) {
      pp.mixing_times =
          read_positive_list(p.at("mixing_times"), "mixing_times");
    }
    pp.quad_horizon =
        require_number(p, "quad_horizon", 0.0, false, pp.quad_horizon);
    pp.occupation_horizon = require_number(p, "occupation_horizon", 0.0,
                                           false, pp.occupation_horizon);
  }
  if (s.probes.t_snap == 0.0) s.probes.t_snap = s.horizon;

  // Structural validation is done; competitive structure is a property of
  // the model, reported distinctly so callers can exit differently.
  const analysis::ConditionReport a1 =
      analysis::check_competitiveness(s.coeffs);
  if (a1.verdict != "holds") {
    std::ostringstream msg;
    msg << "interaction matrices violate self-limitation in state "
        << (a1.witness_index + 1) << " (margin " << a1.margin << ")";
    throw CompetitivenessViolation(msg.str());
  }

  s.hash = scenario_hash_hex(canonical_json(s));
  return s;
}

Scenario load_scenario(const std::string& path) {
  const json j = load_json_file(path);
  std::string dir = ".";
  const auto slash = path.find_last_of('/');
  if (slash != std::string::npos) dir = path.substr(0, slash);
  try {
    return parse_scenario(j, dir);
  } catch (const json::exception& e) {
    schema_fail(e.what());
  }
}

nlohmann::json canonical_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["n_species"] = s.n_species;
  j["alpha0"] = s.alpha0 + 1;
  j["horizon"] = s.horizon;
  json scheme;
  scheme["dt"] = s.scheme.dt;
  scheme["log_clamp"] = s.scheme.log_clamp;
  j["scheme"] = scheme;

  auto gen_json = [](const chain::GeneratorSpec& g) {
    json out;
    out["trunc_size"] = g.size();
    out["tail_mass_bound"] = g.tail_mass_bound();
    json rows = json::array();
    for (int a = 0; a < g.size(); ++a) {
      json row = json::array();
      for (const chain::RateEntry& e : g.row(a)) {
        row.push_back(json::array({e.to + 1, e.rate}));
      }
      rows.push_back(row);
    }
    out["rows"] = rows;
    return out;
  };
  j["generator"] = gen_json(s.generator);
  if (s.has_slow) j["slow_generator"] = gen_json(s.slow);
  if (!s.epsilon_list.empty()) j["epsilon_list"] = s.epsilon_list;

  json x0 = json::array();
  for (int i = 0; i < s.x0.size(); ++i) x0.push_back(s.x0[i]);
  j["x0"] = x0;

  json coeffs = json::array();
  for (int k = 0; k < s.coeffs.n_states(); ++k) {
    json c;
    json b = json::array(), sg = json::array(), a = json::array();
    for (int i = 0; i < s.n_species; ++i) {
      b.push_back(s.coeffs.b[k][i]);
      sg.push_back(s.coeffs.sigma[k][i]);
      json row = json::array();
      for (int l = 0; l < s.n_species; ++l) row.push_back(s.coeffs.a[k](i, l));
      a.push_back(row);
    }
    c["b"] = b;
    c["a"] = a;
    c["sigma"] = sg;
    coeffs.push_back(c);
  }
  j["coefficients"] = coeffs;

  const ProbeParams& pp = s.probes;
  json probes;
  probes["n_paths"] = pp.n_paths;
  probes["n_reps"] = pp.n_reps;
  probes["p_list"] = pp.p_list;
  probes["delta"] = pp.delta;
  probes["extinction_threshold"] = pp.extinction_threshold;
  probes["escape_eps"] = pp.escape_eps;
  probes["radii"] = pp.radii;
  probes["t_snap"] = pp.t_snap;
  probes["pair_scales"] = pp.pair_scales;
  if (!pp.moment_times.empty()) probes["moment_times"] = pp.moment_times;
  probes["mixing_times"] = pp.mixing_times;
  probes["quad_horizon"] = pp.quad_horizon;
  probes["occupation_horizon"] = pp.occupation_horizon;
  j["probes"] = probes;
  return j;
}

std::string scenario_hash_hex(const nlohmann::json& canonical) {
  const std::string dump = canonical.dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hybridlv::io
