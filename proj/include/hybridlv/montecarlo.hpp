#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hybridlv/averaging.hpp"
#include "hybridlv/analysis.hpp"
#include "hybridlv/chain.hpp"
#include "hybridlv/common.hpp"
#include "hybridlv/dynamics.hpp"

namespace hybridlv::mc {

// Everything needed to launch one trajectory, minus the stream.
struct SimSetup {
  dynamics::CoefficientTable coeffs;
  chain::GeneratorSpec gen;
  int alpha0 = 0;
  Vector x0;
  double horizon = 1.0;
  dynamics::SimScheme scheme;
};

struct EnsembleOptions {
  int n_paths = 0;
  std::uint64_t seed = 0;
  // Snapshot spacing; 0 picks the coarsest spacing that keeps roughly 500
  // points. Snapshots always include the initial and final grid points.
  double snap_dt = 0.0;
  std::string scenario_hash;
};

// Full-resolution facts about one path, computed before downsampling.
struct PathStats {
  double min_x = 0.0;     // min over grid points and species
  double sup_norm = 0.0;  // max over grid points of |x(t)|_2
  bool clamped = false;
};

// Trajectories retained on a shared snapshot grid plus per-path summary
// statistics. Clamped paths keep their truncated snapshots and are excluded
// from time-indexed statistics.
struct Ensemble {
  std::string scenario_hash;
  std::uint64_t seed = 0;
  double dt = 0.0;
  double horizon = 0.0;
  Vector snap_times;
  std::vector<dynamics::HybridTrajectory> paths;
  std::vector<PathStats> stats;

  int n_paths() const { return static_cast<int>(paths.size()); }
  int n_usable() const;
  // Index into snap_times nearest to t.
  int snap_index(double t) const;
};

// Outcome of one statistical probe. estimate/ci_halfwidth are parallel
// vectors whose meaning is probe-specific; params carries named scalars
// (tolerances, fitted slopes, noise floors) so reports are self-describing.
struct PropertyReport {
  std::string property;
  std::map<std::string, double> params;
  std::vector<double> estimate;
  std::vector<double> ci_halfwidth;
  std::string verdict;  // "consistent" | "inconsistent" | "inconclusive"
  int n_paths = 0;
  std::uint64_t seed = 0;
  std::string scenario_hash;
  std::string notes;
};

// Thread budget: HYBRIDLV_THREADS when set, hardware concurrency otherwise.
int thread_budget();

// Runs body(k) for k in [0, n) across the thread budget. Results must be
// written to disjoint slots; the partition is deterministic.
void parallel_for(int n, const std::function<void(int)>& body);

// Trajectory k uses the stream addressed by seed XOR k, so any path can be
// reproduced in isolation. Reductions are sequential in path order.
Ensemble run_ensemble(const SimSetup& setup, const EnsembleOptions& opts);

// Mean of sum_i x_i(t)^p over usable paths at each grid time. Verdict
// checks that the late-window running maximum stays within 10% of the
// early-window maximum after a 20% burn-in.
PropertyReport estimate_moment(const Ensemble& ens, double p,
                               const std::vector<double>& t_grid);

// (1-delta)-quantile of |x(t)|_2 at each grid time; consistent when the
// quantile curve stabilizes over the late half.
PropertyReport boundedness_probe(const Ensemble& ens, double delta,
                                 const std::vector<double>& t_grid);

// Escape frequency from nested initial radii (given in decreasing order):
// fraction of paths whose sup-norm leaves escape_eps. The verdict applies
// the stability hypothesis report: when it holds, escape frequencies must
// be non-increasing with the radius and small at the smallest radius.
PropertyReport stability_probe(const SimSetup& setup,
                               const std::vector<double>& radii,
                               double escape_eps, int n_paths,
                               std::uint64_t seed,
                               const std::string& scenario_hash,
                               const analysis::ConditionReport& stability);

// Per-species sample decay exponents plus the fraction of paths ending
// below the extinction threshold, judged against the averaged prediction
// r_bar_i - sigma_bar_i^2 / 2.
PropertyReport extinction_probe(const Ensemble& ens,
                                const averaging::AveragedCoefficients& avg,
                                double threshold);

// Lower and upper delta-quantile floor/ceiling of |x(t)|_2 at the final
// time, with stabilization checks over the late window. delta above 1/2 is
// mirrored so the floor stays below the ceiling.
PropertyReport permanence_probe(const Ensemble& ens,
                                const averaging::AveragedCoefficients& avg,
                                double delta);

// Two-sample Kolmogorov-Smirnov distance (max over species) between the
// time-t_snap law of the switching system at each epsilon and the averaged
// system, against a same-size split-half noise floor.
PropertyReport weak_convergence_distance(
    const SimSetup& base, const chain::GeneratorSpec& fast,
    const chain::GeneratorSpec& slow, const std::vector<double>& eps_list,
    const averaging::AveragedCoefficients& avg, double t_snap, int n_paths,
    std::uint64_t seed, const std::string& scenario_hash);

// Fourth-moment increment ratio E |x(t+s) - x(t)|^4 / s^2, maximized over
// anchor times, per pair scale. Bounded ratios across scales support the
// quarter-Holder modulus of the paths.
PropertyReport holder_diagnostic(const Ensemble& ens,
                                 const std::vector<double>& pair_scales);

// Mean squared occupation error of the composed chain per epsilon and the
// log-log slope against epsilon. Linear scaling has slope 1.
PropertyReport o_epsilon_experiment(const chain::GeneratorSpec& fast,
                                    const chain::GeneratorSpec& slow,
                                    int alpha,
                                    const std::vector<double>& eps_list,
                                    int n_reps, double horizon,
                                    std::uint64_t seed,
                                    const std::string& scenario_hash);

// Largest |F_a - F_b| over the pooled sample, each F an empirical CDF.
double ks_statistic(std::vector<double> a, std::vector<double> b);

// Nearest-rank quantile of an ascending-sorted sample:
// element at index floor(q n), clamped to the valid range.
double quantile_sorted(const std::vector<double>& sorted, double q);

}  // namespace hybridlv::mc
