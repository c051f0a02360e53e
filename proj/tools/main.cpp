#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hybridlv/analysis.hpp"
#include "hybridlv/averaging.hpp"
#include "hybridlv/chain.hpp"
#include "hybridlv/common.hpp"
#include "hybridlv/dynamics.hpp"
#include "hybridlv/io.hpp"
#include "hybridlv/montecarlo.hpp"
#include "hybridlv/rng.hpp"
#include "hybridlv/scenario.hpp"

namespace {

namespace fs = std::filesystem;
using hybridlv::Vector;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitSchema = 2;
constexpr int kExitNonCompetitive = 3;
constexpr int kExitRunFailure = 4;

struct Options {
  std::string command;
  std::string scenario_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string suite = "all";
  int paths_override = 0;
  double horizon_override = 0.0;
  double dt_override = 0.0;
};

struct SummaryRow {
  std::string id;
  std::string kind;
  std::string verdict;
  double value = 0.0;
};

void apply_overrides(hybridlv::io::Scenario& s, const Options& opt) {
  if (opt.horizon_override > 0.0) s.horizon = opt.horizon_override;
  if (opt.dt_override > 0.0) s.scheme.dt = opt.dt_override;
  if (opt.paths_override > 0) {
    s.probes.n_paths = opt.paths_override;
    s.probes.n_reps = opt.paths_override;
  }
  if (s.probes.t_snap > s.horizon) s.probes.t_snap = s.horizon;
  s.hash = hybridlv::io::scenario_hash_hex(hybridlv::io::canonical_json(s));
}

std::string padded(int k) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d", k);
  return buf;
}

void write_manifest(const fs::path& out, const Options& opt,
                    const hybridlv::io::Scenario& s,
                    const std::vector<std::string>& files,
                    const json& extra) {
  json m;
  m["command"] = opt.command;
  m["scenario"] = s.name;
  m["scenario_hash"] = s.hash;
  m["seed"] = opt.seed;
  if (opt.command == "verify") m["suite"] = opt.suite;
  std::vector<std::string> sorted = files;
  std::sort(sorted.begin(), sorted.end());
  m["files"] = sorted;
  if (!extra.is_null()) m["details"] = extra;
  hybridlv::io::write_text((out / "manifest.json").string(), m.dump(2) + "\n");
}

int run_simulate(const hybridlv::io::Scenario& s, const Options& opt) {
  const fs::path out(opt.out_dir);
  fs::create_directories(out);

  const hybridlv::chain::GeneratorSpec gen = s.effective_generator();
  const int n_paths = opt.paths_override > 0 ? opt.paths_override : 1;

  std::vector<std::string> files;
  json details;
  details["trajectories"] = json::array();
  for (int k = 0; k < n_paths; ++k) {
    hybridlv::RngStream stream(opt.seed ^ static_cast<std::uint64_t>(k));
    const hybridlv::dynamics::HybridTrajectory traj =
        hybridlv::dynamics::simulate_hybrid(s.coeffs, gen, s.alpha0, s.x0,
                                            s.horizon, s.scheme, stream);
    const std::string traj_name = "trajectory_" + padded(k) + ".csv";
    const std::string path_name = "regime_path_" + padded(k) + ".csv";
    hybridlv::io::write_trajectory_csv((out / traj_name).string(), traj);
    hybridlv::io::write_regime_path_csv((out / path_name).string(),
                                        traj.regime_path);
    files.push_back(traj_name);
    files.push_back(path_name);
    json t;
    t["file"] = traj_name;
    t["clamped"] = traj.clamped;
    t["n_rows"] = traj.n_points();
    if (traj.clamped) t["clamp_time"] = hybridlv::io::json_number(traj.clamp_time);
    details["trajectories"].push_back(t);
  }
  files.push_back("manifest.json");
  write_manifest(out, opt, s, files, details);
  std::cout << "wrote " << n_paths << " trajectory(ies) to " << opt.out_dir
            << "\n";
  return kExitOk;
}

json condition_to_file(const fs::path& out, const std::string& name,
                       const hybridlv::analysis::ConditionReport& rep,
                       const std::string& hash,
                       std::vector<std::string>& files,
                       std::vector<SummaryRow>& rows) {
  json j = hybridlv::io::to_json(rep);
  j["scenario_hash"] = hash;
  hybridlv::io::write_text((out / name).string(), j.dump(2) + "\n");
  files.push_back(name);
  rows.push_back({rep.condition_id, "condition", rep.verdict, rep.margin});
  return j;
}

void report_to_file(const fs::path& out, const std::string& name,
                    const hybridlv::mc::PropertyReport& rep,
                    std::vector<std::string>& files,
                    std::vector<SummaryRow>& rows) {
  const json j = hybridlv::io::to_json(rep);
  hybridlv::io::write_text((out / name).string(), j.dump(2) + "\n");
  files.push_back(name);
  rows.push_back({rep.property, "property", rep.verdict,
                  rep.estimate.empty() ? 0.0 : rep.estimate.front()});
}

std::vector<double> auto_grid(double horizon) {
  std::vector<double> g;
  for (int k = 0; k <= 10; ++k) g.push_back(horizon * k / 10.0);
  return g;
}

int run_verify(const hybridlv::io::Scenario& s, const Options& opt) {
  static const std::vector<std::string> kSuites{
      "conditions", "boundedness", "stability",
      "extinction", "permanence",  "convergence",
      "all"};
  if (std::find(kSuites.begin(), kSuites.end(), opt.suite) == kSuites.end()) {
    std::cerr << "unknown suite: " << opt.suite << "\n";
    return kExitSchema;
  }
  const bool all = opt.suite == "all";
  if (opt.suite == "convergence" && s.epsilon_list.empty()) {
    std::cerr << "convergence suite needs \"epsilon\" or \"epsilon_list\"\n";
    return kExitSchema;
  }

  const fs::path out(opt.out_dir);
  fs::create_directories(out);
  std::vector<std::string> files;
  std::vector<SummaryRow> rows;

  using namespace hybridlv;

  const chain::StationaryDistribution nu =
      chain::stationary_distribution(s.generator);
  const averaging::AveragedCoefficients avg =
      averaging::average_coefficients(s.coeffs, nu);

  if (all || opt.suite == "conditions") {
    json aj = io::to_json(avg);
    aj["scenario_hash"] = s.hash;
    io::write_text((out / "averaged.json").string(), aj.dump(2) + "\n");
    files.push_back("averaged.json");

    condition_to_file(out, "condition_competitive.json",
                      analysis::check_competitiveness(s.coeffs), s.hash,
                      files, rows);
    condition_to_file(
        out, "condition_mixing.json",
        analysis::check_mixing_window(s.generator, s.probes.mixing_times),
        s.hash, files, rows);
    for (std::size_t i = 0; i < s.probes.p_list.size(); ++i) {
      condition_to_file(
          out, "condition_moment_" + std::to_string(i) + ".json",
          analysis::check_moment_condition(s.coeffs, s.probes.p_list[i]),
          s.hash, files, rows);
    }
    condition_to_file(out, "condition_stability.json",
                      analysis::check_stability_condition(avg), s.hash, files,
                      rows);
    condition_to_file(out, "condition_extinction.json",
                      analysis::check_extinction_condition(avg), s.hash,
                      files, rows);
    const analysis::PermanenceCheck pc =
        analysis::check_permanence_condition(avg);
    condition_to_file(out, "condition_permanence.json", pc.report, s.hash,
                      files, rows);
  }

  mc::SimSetup setup;
  setup.coeffs = s.coeffs;
  setup.gen = s.effective_generator();
  setup.alpha0 = s.alpha0;
  setup.x0 = s.x0;
  setup.horizon = s.horizon;
  setup.scheme = s.scheme;

  const bool needs_ensemble = all || opt.suite == "boundedness" ||
                              opt.suite == "extinction" ||
                              opt.suite == "permanence";
  mc::Ensemble ens;
  if (needs_ensemble) {
    mc::EnsembleOptions eo;
    eo.n_paths = s.probes.n_paths;
    eo.seed = opt.seed;
    eo.scenario_hash = s.hash;
    ens = mc::run_ensemble(setup, eo);
  }

  const std::vector<double> grid =
      s.probes.moment_times.empty() ? auto_grid(s.horizon)
                                    : s.probes.moment_times;

  if (all || opt.suite == "boundedness") {
    for (std::size_t i = 0; i < s.probes.p_list.size(); ++i) {
      report_to_file(out, "moment_" + std::to_string(i) + ".json",
                     mc::estimate_moment(ens, s.probes.p_list[i], grid),
                     files, rows);
    }
    report_to_file(out, "boundedness.json",
                   mc::boundedness_probe(ens, s.probes.delta, grid), files,
                   rows);
    report_to_file(out, "holder.json",
                   mc::holder_diagnostic(ens, s.probes.pair_scales), files,
                   rows);
  }

  if (all || opt.suite == "stability") {
    report_to_file(out, "stability.json",
                   mc::stability_probe(setup, s.probes.radii,
                                       s.probes.escape_eps, s.probes.n_paths,
                                       opt.seed, s.hash,
                                       analysis::check_stability_condition(avg)),
                   files, rows);
  }

  if (all || opt.suite == "extinction") {
    report_to_file(out, "extinction.json",
                   mc::extinction_probe(ens, avg,
                                        s.probes.extinction_threshold),
                   files, rows);
  }

  if (all || opt.suite == "permanence") {
    report_to_file(out, "permanence.json",
                   mc::permanence_probe(ens, avg, s.probes.delta), files,
                   rows);
  }

  if ((all && !s.epsilon_list.empty()) || opt.suite == "convergence") {
    report_to_file(
        out, "weak_convergence.json",
        mc::weak_convergence_distance(setup, s.generator, s.slow,
                                      s.epsilon_list, avg, s.probes.t_snap,
                                      s.probes.n_paths, opt.seed, s.hash),
        files, rows);
    report_to_file(
        out, "occupation.json",
        mc::o_epsilon_experiment(s.generator, s.slow, s.alpha0,
                                 s.epsilon_list, s.probes.n_reps,
                                 s.probes.occupation_horizon, opt.seed,
                                 s.hash),
        files, rows);
  }

  std::ostringstream summary;
  summary << "id,kind,verdict,value\n";
  for (const SummaryRow& r : rows) {
    summary << r.id << ',' << r.kind << ',' << r.verdict << ','
            << io::format_double(r.value) << '\n';
  }
  io::write_text((out / "summary.csv").string(), summary.str());
  files.push_back("summary.csv");
  files.push_back("manifest.json");
  write_manifest(out, opt, s, files, json());

  for (const SummaryRow& r : rows) {
    std::cout << r.id << ": " << r.verdict << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and verification of switching competitive "
               "ecosystems"};
  app.require_subcommand(1);

  Options opt;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("scenario", opt.scenario_path, "scenario JSON file")
        ->required();
    cmd->add_option("--out", opt.out_dir, "output directory")->required();
    cmd->add_option("--seed", opt.seed, "base random seed")->required();
    cmd->add_option("--paths", opt.paths_override,
                    "override path/replicate counts");
    cmd->add_option("--horizon", opt.horizon_override, "override horizon");
    cmd->add_option("--dt", opt.dt_override, "override step size");
  };
  CLI::App* sim = app.add_subcommand("simulate", "write sample trajectories");
  add_common(sim);
  CLI::App* ver = app.add_subcommand("verify", "run verification suites");
  add_common(ver);
  ver->add_option("--suite", opt.suite,
                  "conditions|boundedness|stability|extinction|permanence|"
                  "convergence|all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitSchema;
  }

  opt.command = sim->parsed() ? "simulate" : "verify";

  try {
    hybridlv::io::Scenario s = hybridlv::io::load_scenario(opt.scenario_path);
    apply_overrides(s, opt);
    return opt.command == "simulate" ? run_simulate(s, opt)
                                     : run_verify(s, opt);
  } catch (const hybridlv::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const hybridlv::CompetitivenessViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNonCompetitive;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRunFailure;
  }
}
