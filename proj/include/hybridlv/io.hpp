#pragma once

#include <string>

#include <json.hpp>

#include "hybridlv/analysis.hpp"
#include "hybridlv/averaging.hpp"
#include "hybridlv/chain.hpp"
#include "hybridlv/common.hpp"
#include "hybridlv/dynamics.hpp"
#include "hybridlv/montecarlo.hpp"

namespace hybridlv::io {

// Shortest exact decimal form (17 significant digits); reruns with the same
// inputs produce byte-identical files.
std::string format_double(double v);

// JSON value for a double; non-finite values become the strings "inf",
// "-inf", "nan" because JSON numbers cannot carry them.
nlohmann::json json_number(double v);

// Header t,x_1..x_n,regime; regimes 1-based; one row per retained grid point.
void write_trajectory_csv(const std::string& path,
                          const dynamics::HybridTrajectory& traj);

// Header jump_time,state with the origin as a row at time 0; states 1-based.
void write_regime_path_csv(const std::string& path,
                           const chain::RegimePath& rp);

nlohmann::json to_json(const mc::PropertyReport& rep);
nlohmann::json to_json(const analysis::ConditionReport& rep);
nlohmann::json to_json(const averaging::AveragedCoefficients& avg);

void write_text(const std::string& path, const std::string& content);

}  // namespace hybridlv::io
