#include "hybridlv/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <thread>

namespace hybridlv::mc {

namespace {

constexpr int kMinPathsForVerdict = 100;

std::vector<int> usable_indices(const Ensemble& ens) {
  std::vector<int> idx;
  idx.reserve(ens.paths.size());
  for (int k = 0; k < ens.n_paths(); ++k) {
    if (!ens.stats[k].clamped) idx.push_back(k);
  }
  return idx;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double binomial_halfwidth(double frac, int n) {
  if (n <= 0) return 0.0;
  return 1.96 * std::sqrt(std::max(frac * (1.0 - frac), 0.0) /
                          static_cast<double>(n));
}

// Half-width of the quantile order-statistic interval at z standard errors,
// measured in value space on the sorted sample.
double quantile_halfwidth(const std::vector<double>& sorted, double q,
                          double z) {
  const int n = static_cast<int>(sorted.size());
  if (n < 2) return 0.0;
  const int idx = std::clamp(static_cast<int>(std::floor(q * n)), 0, n - 1);
  const int off = static_cast<int>(
      std::ceil(z * std::sqrt(n * std::max(q * (1.0 - q), 1e-12))));
  const int lo = std::clamp(idx - off, 0, n - 1);
  const int hi = std::clamp(idx + off, 0, n - 1);
  return 0.5 * (sorted[hi] - sorted[lo]);
}

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt));
}

// Terminal states of n_paths fresh trajectories, one row per path; paths
// that clamp before the horizon are marked unusable.
Matrix terminal_states(const SimSetup& setup, int n_paths, std::uint64_t seed,
                       std::vector<char>* usable) {
  const int n = static_cast<int>(setup.x0.size());
  Matrix out(n_paths, n);
  usable->assign(n_paths, 1);
  parallel_for(n_paths, [&](int k) {
    RngStream stream(seed ^ static_cast<std::uint64_t>(k));
    const dynamics::HybridTrajectory traj =
        dynamics::simulate_hybrid(setup.coeffs, setup.gen, setup.alpha0,
                                  setup.x0, setup.horizon, setup.scheme,
                                  stream);
    if (traj.clamped) {
      (*usable)[k] = 0;
      out.row(k).setZero();
    } else {
      out.row(k) = traj.x.row(traj.n_points() - 1);
    }
  });
  return out;
}

}  // namespace

int Ensemble::n_usable() const {
  int n = 0;
  for (const PathStats& s : stats) n += s.clamped ? 0 : 1;
  return n;
}

int Ensemble::snap_index(double t) const {
  const int n = static_cast<int>(snap_times.size());
  if (n == 0) throw DegenerateWindow("empty snapshot grid");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double d = std::abs(snap_times[i] - t);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

int thread_budget() {
  if (const char* env = std::getenv("HYBRIDLV_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(int n, const std::function<void(int)>& body) {
  const int budget = std::min(thread_budget(), n);
  if (budget <= 1) {
    for (int k = 0; k < n; ++k) body(k);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(budget);
  for (int t = 0; t < budget; ++t) {
    const int lo = static_cast<int>(static_cast<long long>(n) * t / budget);
    const int hi =
        static_cast<int>(static_cast<long long>(n) * (t + 1) / budget);
    workers.emplace_back([lo, hi, &body] {
      for (int k = lo; k < hi; ++k) body(k);
    });
  }
  for (std::thread& w : workers) w.join();
}

Ensemble run_ensemble(const SimSetup& setup, const EnsembleOptions& opts) {
  if (opts.n_paths <= 0) throw DimensionMismatch("ensemble needs paths");

  const double dt = setup.scheme.dt;
  const int n_steps = static_cast<int>(std::ceil(setup.horizon / dt - 1e-9));
  int stride;
  if (opts.snap_dt > 0.0) {
    stride = std::max(1, static_cast<int>(std::llround(opts.snap_dt / dt)));
  } else {
    stride = std::max(1, (n_steps + 499) / 500);
  }

  std::vector<int> snap_idx;
  for (int i = 0; i <= n_steps; i += stride) snap_idx.push_back(i);
  if (snap_idx.back() != n_steps) snap_idx.push_back(n_steps);

  Ensemble ens;
  ens.scenario_hash = opts.scenario_hash;
  ens.seed = opts.seed;
  ens.dt = dt;
  ens.horizon = setup.horizon;
  ens.snap_times.resize(static_cast<int>(snap_idx.size()));
  for (std::size_t i = 0; i < snap_idx.size(); ++i) {
    ens.snap_times[static_cast<int>(i)] = snap_idx[i] * dt;
  }
  ens.paths.resize(opts.n_paths);
  ens.stats.resize(opts.n_paths);

  parallel_for(opts.n_paths, [&](int k) {
    RngStream stream(opts.seed ^ static_cast<std::uint64_t>(k));
    dynamics::HybridTrajectory full =
        dynamics::simulate_hybrid(setup.coeffs, setup.gen, setup.alpha0,
                                  setup.x0, setup.horizon, setup.scheme,
                                  stream);
    PathStats st;
    st.clamped = full.clamped;
    st.min_x = full.x.minCoeff();
    st.sup_norm = full.x.rowwise().norm().maxCoeff();
    ens.stats[k] = st;

    dynamics::HybridTrajectory snap;
    snap.clamped = full.clamped;
    snap.clamp_time = full.clamp_time;
    snap.regime_path = std::move(full.regime_path);
    int m = 0;
    while (m < static_cast<int>(snap_idx.size()) &&
           snap_idx[m] < full.n_points()) {
      ++m;
    }
    snap.times.resize(m);
    snap.x.resize(m, full.x.cols());
    snap.regimes.resize(m);
    for (int i = 0; i < m; ++i) {
      snap.times[i] = full.times[snap_idx[i]];
      snap.x.row(i) = full.x.row(snap_idx[i]);
      snap.regimes[i] = full.regimes[snap_idx[i]];
    }
    ens.paths[k] = std::move(snap);
  });

  return ens;
}

PropertyReport estimate_moment(const Ensemble& ens, double p,
                               const std::vector<double>& t_grid) {
  if (!(p >= 0.0)) throw DimensionMismatch("moment order must be >= 0");
  if (t_grid.empty()) throw DimensionMismatch("empty time grid");

  const std::vector<int> usable = usable_indices(ens);
  const int n = static_cast<int>(usable.size());

  PropertyReport rep;
  rep.property = "moment-bound";
  rep.params["p"] = p;
  rep.n_paths = n;
  rep.seed = ens.seed;
  rep.scenario_hash = ens.scenario_hash;

  std::vector<double> vals(n);
  for (double t : t_grid) {
    const int idx = ens.snap_index(t);
    for (int j = 0; j < n; ++j) {
      vals[j] = ens.paths[usable[j]].x.row(idx).array().pow(p).sum();
    }
    const double m = mean_of(vals);
    rep.estimate.push_back(m);
    rep.ci_halfwidth.push_back(n > 1 ? 1.96 * sd_of(vals, m) / std::sqrt(n)
                                     : 0.0);
  }

  const double burn = 0.2 * ens.horizon;
  std::vector<double> post;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (t_grid[i] >= burn) post.push_back(rep.estimate[i]);
  }
  if (n < kMinPathsForVerdict || post.size() < 4) {
    rep.verdict = "inconclusive";
    rep.notes = "too few paths or grid points past the burn-in";
    return rep;
  }
  const std::size_t half = post.size() / 2;
  const double early =
      *std::max_element(post.begin(), post.begin() + half);
  const double late = *std::max_element(post.begin() + half, post.end());
  rep.params["early_max"] = early;
  rep.params["late_max"] = late;
  rep.verdict = (std::isfinite(late) && late <= 1.1 * early)
                    ? "consistent"
                    : "inconsistent";
  return rep;
}

PropertyReport boundedness_probe(const Ensemble& ens, double delta,
                                 const std::vector<double>& t_grid) {
  if (!(delta > 0.0) || !(delta <= 1.0)) {
    throw DimensionMismatch("tail mass must lie in (0, 1]");
  }
  if (t_grid.empty()) throw DimensionMismatch("empty time grid");

  const std::vector<int> usable = usable_indices(ens);
  const int n = static_cast<int>(usable.size());
  const double q = 1.0 - delta;

  PropertyReport rep;
  rep.property = "boundedness-in-probability";
  rep.params["delta"] = delta;
  rep.n_paths = n;
  rep.seed = ens.seed;
  rep.scenario_hash = ens.scenario_hash;

  std::vector<double> norms(n);
  for (double t : t_grid) {
    const int idx = ens.snap_index(t);
    for (int j = 0; j < n; ++j) {
      norms[j] = ens.paths[usable[j]].x.row(idx).norm();
    }
    std::sort(norms.begin(), norms.end());
    rep.estimate.push_back(quantile_sorted(norms, q));
    rep.ci_halfwidth.push_back(quantile_halfwidth(norms, q, 1.96));
  }

  std::vector<double> late;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (t_grid[i] >= 0.5 * ens.horizon) late.push_back(rep.estimate[i]);
  }
  if (n < kMinPathsForVerdict || late.size() < 2) {
    rep.verdict = "inconclusive";
    rep.notes = "too few paths or too few late grid points";
    return rep;
  }
  const double lo = *std::min_element(late.begin(), late.end());
  const double hi = *std::max_element(late.begin(), late.end());
  rep.params["late_min"] = lo;
  rep.params["late_max"] = hi;
  rep.verdict =
      (lo > 0.0 && hi / lo <= 1.2 && std::isfinite(hi)) ? "consistent"
                                                        : "inconsistent";
  return rep;
}

PropertyReport stability_probe(const SimSetup& setup,
                               const std::vector<double>& radii,
                               double escape_eps, int n_paths,
                               std::uint64_t seed,
                               const std::string& scenario_hash,
                               const analysis::ConditionReport& stability) {
  if (radii.empty()) throw DimensionMismatch("no initial radii");
  for (std::size_t j = 0; j < radii.size(); ++j) {
    if (!(radii[j] > 0.0)) throw DimensionMismatch("radii must be positive");
    if (j > 0 && !(radii[j] < radii[j - 1])) {
      throw DimensionMismatch("radii must strictly decrease");
    }
  }
  if (!(escape_eps > 0.0)) throw DimensionMismatch("escape radius <= 0");

  PropertyReport rep;
  rep.property = "stability-in-probability";
  rep.params["escape_eps"] = escape_eps;
  rep.n_paths = n_paths;
  rep.seed = seed;
  rep.scenario_hash = scenario_hash;

  const Vector dir = setup.x0 / setup.x0.norm();
  for (std::size_t j = 0; j < radii.size(); ++j) {
    SimSetup local = setup;
    local.x0 = radii[j] * dir;
    EnsembleOptions opts;
    opts.n_paths = n_paths;
    opts.seed = derived_seed(seed, 101 + j);
    opts.scenario_hash = scenario_hash;
    const Ensemble ens = run_ensemble(local, opts);
    int escaped = 0;
    for (const PathStats& st : ens.stats) {
      if (st.sup_norm > escape_eps || st.clamped) ++escaped;
    }
    const double frac = static_cast<double>(escaped) / n_paths;
    rep.estimate.push_back(frac);
    rep.ci_halfwidth.push_back(binomial_halfwidth(frac, n_paths));
  }

  if (stability.verdict != "holds") {
    rep.verdict = "inconclusive";
    rep.notes =
        "stability hypothesis not established for these coefficients; "
        "escape frequencies reported without a verdict";
    return rep;
  }
  if (n_paths < kMinPathsForVerdict) {
    rep.verdict = "inconclusive";
    rep.notes = "too few paths";
    return rep;
  }
  bool monotone = true;
  for (std::size_t j = 1; j < rep.estimate.size(); ++j) {
    if (rep.estimate[j] > rep.estimate[j - 1]) monotone = false;
  }
  const double last = rep.estimate.back();
  if (monotone && last <= 0.05) {
    rep.verdict = "consistent";
  } else if (last >= 0.5) {
    rep.verdict = "inconsistent";
  } else {
    rep.verdict = "inconclusive";
  }
  return rep;
}

PropertyReport extinction_probe(const Ensemble& ens,
                                const averaging::AveragedCoefficients& avg,
                                double threshold) {
  if (!(threshold > 0.0)) throw DimensionMismatch("threshold must be > 0");
  const std::vector<int> usable = usable_indices(ens);
  const int n = static_cast<int>(usable.size());
  const int n_species =
      n > 0 ? static_cast<int>(ens.paths[usable[0]].x.cols()) : 0;

  PropertyReport rep;
  rep.property = "extinction-rate";
  rep.params["threshold"] = threshold;
  rep.n_paths = n;
  rep.seed = ens.seed;
  rep.scenario_hash = ens.scenario_hash;
  if (n == 0) {
    rep.verdict = "inconclusive";
    rep.notes = "no usable paths";
    return rep;
  }

  const double burn = 0.2 * ens.horizon;
  std::vector<std::vector<double>> slopes(n_species);
  bool fit_ok = true;
  std::string fit_err;
  for (int j = 0; j < n && fit_ok; ++j) {
    for (int i = 0; i < n_species; ++i) {
      try {
        slopes[i].push_back(analysis::sample_lyapunov_exponent(
            ens.paths[usable[j]], i, burn));
      } catch (const Error& e) {
        fit_ok = false;
        fit_err = e.what();
        break;
      }
    }
  }

  int extinct = 0;
  for (int j = 0; j < n; ++j) {
    const auto& traj = ens.paths[usable[j]];
    if (traj.x.row(traj.n_points() - 1).norm() < threshold) ++extinct;
  }
  const double frac = static_cast<double>(extinct) / n;

  if (!fit_ok) {
    rep.estimate.assign(n_species, 0.0);
    rep.estimate.push_back(frac);
    rep.ci_halfwidth.assign(n_species + 1, 0.0);
    rep.verdict = "inconclusive";
    rep.notes = "exponent fit failed: " + fit_err;
    return rep;
  }

  bool all_below_zero = true;
  bool all_near_prediction = true;
  for (int i = 0; i < n_species; ++i) {
    const double m = mean_of(slopes[i]);
    const double se = n > 1 ? sd_of(slopes[i], m) / std::sqrt(n) : 0.0;
    rep.estimate.push_back(m);
    rep.ci_halfwidth.push_back(1.96 * se);
    const double pred =
        avg.r_bar[i] - 0.5 * avg.sigma_bar[i] * avg.sigma_bar[i];
    std::ostringstream key;
    key << "predicted_" << i;
    rep.params[key.str()] = pred;
    if (!(m + 1.96 * se < 0.0)) all_below_zero = false;
    if (!(std::abs(m - pred) <= 3.0 * se)) all_near_prediction = false;
  }
  rep.estimate.push_back(frac);
  rep.ci_halfwidth.push_back(binomial_halfwidth(frac, n));
  rep.params["extinct_fraction"] = frac;

  const analysis::ConditionReport cond =
      analysis::check_extinction_condition(avg);
  rep.params["decay_rate_c"] = cond.margin;

  if (n < kMinPathsForVerdict) {
    rep.verdict = "inconclusive";
    rep.notes = "too few paths";
    return rep;
  }
  bool positive_evidence = false;
  for (int i = 0; i < n_species; ++i) {
    if (rep.estimate[i] - rep.ci_halfwidth[i] > 0.0) positive_evidence = true;
  }
  if (frac <= 0.5 || positive_evidence) {
    rep.verdict = "inconsistent";
    rep.notes = "populations do not die out along the ensemble";
  } else if (cond.verdict == "holds" && all_below_zero &&
             all_near_prediction && frac >= 0.99) {
    rep.verdict = "consistent";
  } else {
    rep.verdict = "inconclusive";
    if (cond.verdict != "holds") {
      rep.notes = "decay hypothesis fails; empirical decay reported only";
    }
  }
  return rep;
}

PropertyReport permanence_probe(const Ensemble& ens,
                                const averaging::AveragedCoefficients& avg,
                                double delta) {
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw DimensionMismatch("quantile level must lie in (0, 1)");
  }
  const double d_eff = std::min(delta, 1.0 - delta);

  const std::vector<int> usable = usable_indices(ens);
  const int n = static_cast<int>(usable.size());

  PropertyReport rep;
  rep.property = "permanence-floor";
  rep.params["delta"] = delta;
  rep.params["delta_effective"] = d_eff;
  rep.n_paths = n;
  rep.seed = ens.seed;
  rep.scenario_hash = ens.scenario_hash;
  if (n == 0) {
    rep.verdict = "inconclusive";
    rep.notes = "no usable paths";
    return rep;
  }

  const int n_snap = static_cast<int>(ens.snap_times.size());
  std::vector<double> floor_curve, ceil_curve;
  std::vector<double> norms(n);
  for (int s = 0; s < n_snap; ++s) {
    for (int j = 0; j < n; ++j) {
      norms[j] = ens.paths[usable[j]].x.row(s).norm();
    }
    std::sort(norms.begin(), norms.end());
    floor_curve.push_back(quantile_sorted(norms, d_eff));
    ceil_curve.push_back(quantile_sorted(norms, 1.0 - d_eff));
  }

  // Final-time quantile spreads at the 1.96 and 3 SE scales.
  for (int j = 0; j < n; ++j) {
    norms[j] = ens.paths[usable[j]].x.row(n_snap - 1).norm();
  }
  std::sort(norms.begin(), norms.end());
  const double h_final = floor_curve.back();
  const double k_final = ceil_curve.back();
  const double h_half = quantile_halfwidth(norms, d_eff, 1.96);
  const double k_half = quantile_halfwidth(norms, 1.0 - d_eff, 1.96);
  const double h_3se = quantile_halfwidth(norms, d_eff, 3.0);

  rep.estimate = {h_final, k_final};
  rep.ci_halfwidth = {h_half, k_half};

  double h_late_min = h_final, h_late_max = h_final;
  double k_late_min = k_final, k_late_max = k_final;
  for (int s = 0; s < n_snap; ++s) {
    if (ens.snap_times[s] >= 0.5 * ens.horizon) {
      h_late_min = std::min(h_late_min, floor_curve[s]);
      h_late_max = std::max(h_late_max, floor_curve[s]);
      k_late_min = std::min(k_late_min, ceil_curve[s]);
      k_late_max = std::max(k_late_max, ceil_curve[s]);
    }
  }
  const double h_mid = floor_curve[ens.snap_index(0.5 * ens.horizon)];
  rep.params["floor_3se_margin"] = h_final - 3.0 * (h_half / 1.96);
  rep.params["floor_mid"] = h_mid;
  rep.params["min_growth_rate"] = avg.b_hat;

  if (n < kMinPathsForVerdict || n_snap < 4) {
    rep.verdict = "inconclusive";
    rep.notes = "too few paths or snapshots";
    return rep;
  }
  const bool stable = h_late_min > 0.0 && k_late_min > 0.0 &&
                      h_late_max / h_late_min <= 1.2 &&
                      k_late_max / k_late_min <= 1.2;
  const bool positive_floor = h_final - h_3se > 0.0 && h_final > 0.0;
  if (avg.b_hat > 0.0 && stable && positive_floor) {
    rep.verdict = "consistent";
  } else if (h_final < 0.5 * h_mid) {
    rep.verdict = "inconsistent";
    rep.notes = "population floor collapses over the late window";
  } else {
    rep.verdict = "inconclusive";
  }
  return rep;
}

PropertyReport weak_convergence_distance(
    const SimSetup& base, const chain::GeneratorSpec& fast,
    const chain::GeneratorSpec& slow, const std::vector<double>& eps_list,
    const averaging::AveragedCoefficients& avg, double t_snap, int n_paths,
    std::uint64_t seed, const std::string& scenario_hash) {
  if (eps_list.empty()) throw DimensionMismatch("no time-scale separations");
  if (!(t_snap > 0.0)) throw DimensionMismatch("snapshot time must be > 0");
  if (n_paths < 2) throw DimensionMismatch("need at least two paths");

  const int n_species = static_cast<int>(base.x0.size());

  PropertyReport rep;
  rep.property = "weak-convergence";
  rep.params["t_snap"] = t_snap;
  rep.n_paths = n_paths;
  rep.seed = seed;
  rep.scenario_hash = scenario_hash;

  SimSetup avg_setup;
  avg_setup.coeffs = averaging::one_state_table(avg);
  avg_setup.gen = chain::GeneratorSpec::zero(1);
  avg_setup.alpha0 = 0;
  avg_setup.x0 = base.x0;
  avg_setup.horizon = t_snap;
  avg_setup.scheme = base.scheme;

  std::vector<char> avg_ok;
  const Matrix avg_term =
      terminal_states(avg_setup, n_paths, derived_seed(seed, 0xA11), &avg_ok);

  // Split-half distance of the averaged sample is the resolution floor of
  // the comparison.
  double floor_ks = 0.0;
  for (int i = 0; i < n_species; ++i) {
    std::vector<double> h1, h2;
    for (int k = 0; k < n_paths; ++k) {
      if (!avg_ok[k]) continue;
      (k % 2 == 0 ? h1 : h2).push_back(avg_term(k, i));
    }
    if (h1.size() > 1 && h2.size() > 1) {
      floor_ks = std::max(floor_ks, ks_statistic(h1, h2));
    }
  }
  rep.params["noise_floor"] = floor_ks;

  for (std::size_t j = 0; j < eps_list.size(); ++j) {
    if (!(eps_list[j] > 0.0)) {
      throw DimensionMismatch("time-scale separations must be positive");
    }
    SimSetup sw = base;
    sw.gen = chain::compose_two_time_scale(fast, slow, eps_list[j]);
    sw.horizon = t_snap;
    std::vector<char> sw_ok;
    const Matrix sw_term =
        terminal_states(sw, n_paths, derived_seed(seed, 0xE90 + j), &sw_ok);

    double ks = 0.0;
    double moment_gap = 0.0;
    for (int i = 0; i < n_species; ++i) {
      std::vector<double> a, b;
      for (int k = 0; k < n_paths; ++k) {
        if (sw_ok[k]) a.push_back(sw_term(k, i));
        if (avg_ok[k]) b.push_back(avg_term(k, i));
      }
      ks = std::max(ks, ks_statistic(a, b));
      const double ma = mean_of(a), mb = mean_of(b);
      const double va = sd_of(a, ma), vb = sd_of(b, mb);
      moment_gap = std::max(
          moment_gap, std::abs(ma - mb) / (std::abs(mb) + 1e-300));
      moment_gap = std::max(moment_gap,
                            std::abs(va - vb) / (std::abs(vb) + 1e-300));
    }
    rep.estimate.push_back(ks);
    rep.ci_halfwidth.push_back(floor_ks);
    std::ostringstream key;
    key << "moment_gap_" << j;
    rep.params[key.str()] = moment_gap;
  }

  if (n_paths < kMinPathsForVerdict) {
    rep.verdict = "inconclusive";
    rep.notes = "too few paths";
    return rep;
  }
  bool non_increasing = true;
  for (std::size_t j = 1; j < rep.estimate.size(); ++j) {
    if (rep.estimate[j] > rep.estimate[j - 1]) non_increasing = false;
  }
  const double last = rep.estimate.back();
  if (non_increasing && last <= 3.0 * floor_ks) {
    rep.verdict = "consistent";
  } else if (last > 3.0 * floor_ks && last >= rep.estimate.front()) {
    rep.verdict = "inconsistent";
  } else {
    rep.verdict = "inconclusive";
  }
  return rep;
}

PropertyReport holder_diagnostic(const Ensemble& ens,
                                 const std::vector<double>& pair_scales) {
  if (pair_scales.empty()) throw DimensionMismatch("no pair scales");
  const std::vector<int> usable = usable_indices(ens);
  const int n = static_cast<int>(usable.size());

  PropertyReport rep;
  rep.property = "increment-fourth-moment";
  rep.n_paths = n;
  rep.seed = ens.seed;
  rep.scenario_hash = ens.scenario_hash;
  if (n < 2 || ens.snap_times.size() < 2) {
    rep.verdict = "inconclusive";
    rep.notes = "too few paths or snapshots";
    return rep;
  }

  const double step = ens.snap_times[1] - ens.snap_times[0];
  // Trailing appended snapshot may break uniform spacing; restrict anchors
  // to the uniform prefix.
  int uniform_end = static_cast<int>(ens.snap_times.size()) - 1;
  if (uniform_end >= 2 &&
      std::abs((ens.snap_times[uniform_end] -
                ens.snap_times[uniform_end - 1]) -
               step) > 1e-9 * std::max(1.0, step)) {
    --uniform_end;
  }

  std::vector<double> used_scales;
  std::vector<double> diffs(n);
  for (double s : pair_scales) {
    if (!(s > 0.0)) throw DimensionMismatch("pair scales must be positive");
    const int off = static_cast<int>(std::llround(s / step));
    if (off < 1 || off > uniform_end) continue;
    if (std::abs(off * step - s) > 0.25 * s) continue;

    const int n_anchor_max = uniform_end - off + 1;
    const int anchor_stride = std::max(1, n_anchor_max / 16);
    double best = -1.0, best_ci = 0.0;
    for (int a0 = 0; a0 + off <= uniform_end; a0 += anchor_stride) {
      for (int j = 0; j < n; ++j) {
        const auto& x = ens.paths[usable[j]].x;
        const double d = (x.row(a0 + off) - x.row(a0)).norm();
        diffs[j] = d * d * d * d;
      }
      const double m = mean_of(diffs);
      const double ratio = m / (s * s);
      if (ratio > best) {
        best = ratio;
        best_ci = 1.96 * sd_of(diffs, m) / (std::sqrt(n) * s * s);
      }
    }
    rep.estimate.push_back(best);
    rep.ci_halfwidth.push_back(best_ci);
    used_scales.push_back(s);
    std::ostringstream key;
    key << "scale_" << used_scales.size() - 1;
    rep.params[key.str()] = s;
  }

  if (n < kMinPathsForVerdict || used_scales.empty()) {
    rep.verdict = "inconclusive";
    rep.notes = "too few paths or no representable scales";
    return rep;
  }
  if (used_scales.size() == 1) {
    rep.verdict = "inconclusive";
    rep.notes = "single usable scale cannot bound the ratio spread";
    return rep;
  }
  const double lo =
      *std::min_element(rep.estimate.begin(), rep.estimate.end());
  const double hi =
      *std::max_element(rep.estimate.begin(), rep.estimate.end());
  rep.params["ratio_spread"] = lo > 0.0 ? hi / lo : 0.0;
  rep.verdict =
      (lo > 0.0 && hi / lo <= 5.0) ? "consistent" : "inconsistent";
  return rep;
}

PropertyReport o_epsilon_experiment(const chain::GeneratorSpec& fast,
                                    const chain::GeneratorSpec& slow,
                                    int alpha,
                                    const std::vector<double>& eps_list,
                                    int n_reps, double horizon,
                                    std::uint64_t seed,
                                    const std::string& scenario_hash) {
  if (eps_list.empty()) throw DimensionMismatch("no time-scale separations");
  if (n_reps < 2) throw DimensionMismatch("need at least two replicates");

  const chain::StationaryDistribution nu = chain::stationary_distribution(fast);

  PropertyReport rep;
  rep.property = "occupation-error-scaling";
  rep.params["horizon"] = horizon;
  rep.n_paths = n_reps;
  rep.seed = seed;
  rep.scenario_hash = scenario_hash;

  for (std::size_t j = 0; j < eps_list.size(); ++j) {
    if (!(eps_list[j] > 0.0)) {
      throw DimensionMismatch("time-scale separations must be positive");
    }
    const chain::TwoTimeScaleChain ts{fast, slow, eps_list[j]};
    const std::uint64_t base = derived_seed(seed, 0x0E5 + j);
    std::vector<double> sq(n_reps);
    parallel_for(n_reps, [&](int k) {
      RngStream stream(base ^ static_cast<std::uint64_t>(k));
      const double s =
          chain::occupation_error_sample(ts, alpha, nu, horizon, stream);
      sq[k] = s * s;
    });
    const double m = mean_of(sq);
    rep.estimate.push_back(m);
    rep.ci_halfwidth.push_back(1.96 * sd_of(sq, m) / std::sqrt(n_reps));
  }

  bool degenerate = false;
  for (double m : rep.estimate) {
    if (!(m > 0.0) || !std::isfinite(m)) degenerate = true;
  }
  if (degenerate || eps_list.size() < 2) {
    rep.verdict = "inconclusive";
    rep.notes = "degenerate occupation-error samples or single separation";
    return rep;
  }

  Vector lx(static_cast<int>(eps_list.size()));
  Vector ly(static_cast<int>(eps_list.size()));
  for (std::size_t j = 0; j < eps_list.size(); ++j) {
    lx[static_cast<int>(j)] = std::log(eps_list[j]);
    ly[static_cast<int>(j)] = std::log(rep.estimate[j]);
  }
  const double slope = linear_fit(lx, ly).slope;
  rep.params["slope"] = slope;

  if (n_reps < kMinPathsForVerdict) {
    rep.verdict = "inconclusive";
    rep.notes = "too few replicates";
    return rep;
  }
  rep.verdict =
      (slope >= 0.7 && slope <= 1.3) ? "consistent" : "inconsistent";
  return rep;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) {
    throw DimensionMismatch("empty sample in distance computation");
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t ia = 0, ib = 0;
  double d = 0.0;
  while (ia < a.size() && ib < b.size()) {
    const double v = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] <= v) ++ia;
    while (ib < b.size() && b[ib] <= v) ++ib;
    d = std::max(d, std::abs(ia / na - ib / nb));
  }
  return d;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw DimensionMismatch("empty sample");
  if (!(q >= 0.0) || !(q <= 1.0)) {
    throw DimensionMismatch("quantile level outside [0, 1]");
  }
  const int n = static_cast<int>(sorted.size());
  const int idx =
      std::clamp(static_cast<int>(std::floor(q * n)), 0, n - 1);
  return sorted[idx];
}

}  // namespace hybridlv::mc
