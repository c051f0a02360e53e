#include "hybridlv/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hybridlv::io {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  out << content;
  if (!out) throw Error("write failed: " + path);
}

void write_trajectory_csv(const std::string& path,
                          const dynamics::HybridTrajectory& traj) {
  std::ostringstream s;
  s << "t";
  for (int i = 0; i < traj.x.cols(); ++i) s << ",x_" << (i + 1);
  s << ",regime\n";
  for (int k = 0; k < traj.n_points(); ++k) {
    s << format_double(traj.times[k]);
    for (int i = 0; i < traj.x.cols(); ++i) {
      s << ',' << format_double(traj.x(k, i));
    }
    s << ',' << (traj.regimes[k] + 1) << '\n';
  }
  write_text(path, s.str());
}

void write_regime_path_csv(const std::string& path,
                           const chain::RegimePath& rp) {
  std::ostringstream s;
  s << "jump_time,state\n";
  s << format_double(0.0) << ',' << (rp.origin + 1) << '\n';
  for (int k = 0; k < rp.n_jumps(); ++k) {
    s << format_double(rp.jump_times[k]) << ',' << (rp.states[k] + 1) << '\n';
  }
  write_text(path, s.str());
}

nlohmann::json to_json(const mc::PropertyReport& rep) {
  nlohmann::json j;
  j["property"] = rep.property;
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : rep.params) params[k] = json_number(v);
  j["params"] = params;
  nlohmann::json est = nlohmann::json::array();
  for (double v : rep.estimate) est.push_back(json_number(v));
  j["estimate"] = est;
  nlohmann::json ci = nlohmann::json::array();
  for (double v : rep.ci_halfwidth) ci.push_back(json_number(v));
  j["ci"] = ci;
  j["verdict"] = rep.verdict;
  j["n_paths"] = rep.n_paths;
  j["seed"] = rep.seed;
  j["scenario_hash"] = rep.scenario_hash;
  if (!rep.notes.empty()) j["notes"] = rep.notes;
  return j;
}

nlohmann::json to_json(const analysis::ConditionReport& rep) {
  nlohmann::json j;
  j["condition_id"] = rep.condition_id;
  j["verdict"] = rep.verdict;
  j["witness_index"] = rep.witness_index;
  j["margin"] = json_number(rep.margin);
  j["details"] = rep.details;
  return j;
}

nlohmann::json to_json(const averaging::AveragedCoefficients& avg) {
  nlohmann::json j;
  auto vec = [](const Vector& v) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(json_number(v[i]));
    return a;
  };
  j["r_bar"] = vec(avg.r_bar);
  j["b_bar"] = vec(avg.b_bar);
  j["sigma_bar"] = vec(avg.sigma_bar);
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < avg.a_bar.rows(); ++i) {
    rows.push_back(vec(avg.a_bar.row(i)));
  }
  j["a_bar"] = rows;
  j["r_min"] = json_number(avg.r_tilde);
  j["r_max"] = json_number(avg.r_hat);
  j["b_min"] = json_number(avg.b_hat);
  j["a_diag_min"] = json_number(avg.a_tilde);
  j["sigma_max"] = json_number(avg.sigma_tilde);
  j["tail_bound"] = json_number(avg.tail_bound);
  return j;
}

}  // namespace hybridlv::io
