#include "hybridlv/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

namespace hybridlv::chain {

namespace {

// Dense-window operations are meant for modest truncation windows; beyond
// this cap the memory and cubic cost are no longer sensible.
constexpr int kDenseWindowCap = 500;

Vector exit_rates(const std::vector<std::vector<RateEntry>>& rows) {
  Vector exit(rows.size());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    double q = 0.0;
    for (const RateEntry& e : rows[a]) q += e.rate;
    exit[static_cast<int>(a)] = q;
  }
  return exit;
}

}  // namespace

double GeneratorSpec::max_exit_rate() const {
  return exit_.size() == 0 ? 0.0 : exit_.maxCoeff();
}

double GeneratorSpec::rate(int from, int to) const {
  if (from == to) return -exit_[from];
  for (const RateEntry& e : rows_[from]) {
    if (e.to == to) return e.rate;
  }
  return 0.0;
}

double GeneratorSpec::row_sum(int a) const {
  // Same order and same values as the construction-time exit sum, so the
  // difference cancels exactly in floating point.
  double q = 0.0;
  for (const RateEntry& e : rows_[a]) q += e.rate;
  return q - exit_[a];
}

Matrix GeneratorSpec::dense() const {
  const int n = size();
  Matrix q = Matrix::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    for (const RateEntry& e : rows_[a]) q(a, e.to) += e.rate;
    q(a, a) = -exit_[a];
  }
  return q;
}

GeneratorSpec GeneratorSpec::zero(int n) {
  GeneratorSpec g;
  g.rows_.assign(n, {});
  g.exit_ = Vector::Zero(n);
  g.tail_bound_ = 0.0;
  return g;
}

GeneratorSpec build_generator(
    const std::vector<std::vector<RateEntry>>& rate_rows, int trunc_size,
    double tail_tol) {
  if (trunc_size <= 0) throw DimensionMismatch("truncation window is empty");
  if (static_cast<int>(rate_rows.size()) > trunc_size) {
    throw DimensionMismatch("more rate rows than retained states");
  }
  if (!(tail_tol >= 0.0)) throw NegativeRate("tail tolerance must be >= 0");

  std::vector<std::vector<RateEntry>> rows(trunc_size);
  double tail_bound = 0.0;
  for (std::size_t a = 0; a < rate_rows.size(); ++a) {
    const int from = static_cast<int>(a);
    std::map<int, double> merged;
    double lost = 0.0;
    for (const RateEntry& e : rate_rows[a]) {
      if (!(e.rate >= 0.0) || !std::isfinite(e.rate)) {
        std::ostringstream msg;
        msg << "rate " << from << " -> " << e.to << " is " << e.rate;
        throw NegativeRate(msg.str());
      }
      if (e.to == from) {
        throw NegativeRate("self-loop rates are not representable");
      }
      if (e.to < 0 || e.to >= trunc_size) {
        lost += e.rate;  // dropped: target beyond the retained window
      } else if (e.rate > 0.0) {
        merged[e.to] += e.rate;
      }
    }
    tail_bound = std::max(tail_bound, lost);
    rows[a].reserve(merged.size());
    for (const auto& [to, r] : merged) rows[a].push_back({to, r});
  }

  if (tail_bound > tail_tol) {
    std::ostringstream msg;
    msg << "truncation drops rate " << tail_bound << " from some state, above "
        << "tolerance " << tail_tol;
    throw TailMassExceeded(msg.str());
  }

  GeneratorSpec g;
  g.rows_ = std::move(rows);
  g.exit_ = exit_rates(g.rows_);
  g.tail_bound_ = tail_bound;
  return g;
}

GeneratorSpec compose_two_time_scale(const GeneratorSpec& fast,
                                     const GeneratorSpec& slow,
                                     double epsilon) {
  if (fast.size() != slow.size()) {
    throw DimensionMismatch("fast and slow parts use different windows");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw NegativeRate("time-scale separation must be a positive number");
  }
  const int n = fast.size();
  GeneratorSpec g;
  g.rows_.resize(n);
  for (int a = 0; a < n; ++a) {
    std::map<int, double> merged;
    for (const RateEntry& e : fast.rows_[a]) merged[e.to] += e.rate / epsilon;
    for (const RateEntry& e : slow.rows_[a]) merged[e.to] += e.rate;
    g.rows_[a].reserve(merged.size());
    for (const auto& [to, r] : merged) {
      if (r > 0.0) g.rows_[a].push_back({to, r});
    }
  }
  g.exit_ = exit_rates(g.rows_);
  g.tail_bound_ = fast.tail_bound_ / epsilon + slow.tail_bound_;
  return g;
}

bool is_irreducible(const GeneratorSpec& q) {
  const int n = q.size();
  if (n == 0) return false;
  if (n == 1) return true;

  // Forward and reverse reachability from state 0 must both cover the window.
  auto reach = [n, &q](bool reverse) {
    std::vector<std::vector<int>> adj(n);
    for (int a = 0; a < n; ++a) {
      for (const RateEntry& e : q.row(a)) {
        if (e.rate > 0.0) {
          if (reverse) {
            adj[e.to].push_back(a);
          } else {
            adj[a].push_back(e.to);
          }
        }
      }
    }
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : adj[v]) {
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          stack.push_back(w);
        }
      }
    }
    return count == n;
  };
  return reach(false) && reach(true);
}

StationaryDistribution stationary_distribution(const GeneratorSpec& q,
                                               double tol) {
  const int n = q.size();
  if (n == 0) throw DimensionMismatch("empty window");
  if (n > kDenseWindowCap) {
    throw WindowTooLarge("stationary solve beyond the dense window cap");
  }
  if (!is_irreducible(q)) {
    throw NotIrreducible("retained window is not one communicating class");
  }

  // nu Q = 0 with the normalization row replacing the last equation.
  Matrix a = q.dense().transpose();
  a.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs[n - 1] = 1.0;

  Eigen::FullPivLU<Matrix> lu(a);
  Vector nu = lu.solve(rhs);
  // One step of iterative refinement tightens the residual near the
  // 1e-12 scale required of small windows.
  nu += lu.solve(rhs - a * nu);

  const double mass = nu.sum();
  if (!std::isfinite(mass) || mass <= 0.0) {
    throw SolverFailure("stationary solve produced a non-normalizable vector");
  }
  nu /= mass;

  for (int i = 0; i < n; ++i) {
    if (!(nu[i] > 0.0)) {
      throw SolverFailure(
          "stationary distribution has a nonpositive entry on the window");
    }
  }

  const double residual = (q.dense().transpose() * nu).cwiseAbs().maxCoeff();
  if (!(residual <= tol)) {
    std::ostringstream msg;
    msg << "stationary residual " << residual << " exceeds tolerance " << tol;
    throw SolverFailure(msg.str());
  }
  return {nu, residual};
}

int RegimePath::state_at(double t) const {
  // Index of the last jump time <= t.
  const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  const auto k = static_cast<std::size_t>(it - jump_times.begin());
  return k == 0 ? origin : states[k - 1];
}

int RegimePath::state_before(double t) const {
  const auto it = std::lower_bound(jump_times.begin(), jump_times.end(), t);
  const auto k = static_cast<std::size_t>(it - jump_times.begin());
  return k == 0 ? origin : states[k - 1];
}

RegimePath sample_path(const GeneratorSpec& q, int alpha0, double horizon,
                       RngStream& stream) {
  if (alpha0 < 0 || alpha0 >= q.size()) {
    throw MissingState("initial regime outside the retained window");
  }
  if (!(horizon >= 0.0)) throw DimensionMismatch("negative horizon");

  RegimePath path;
  path.origin = alpha0;
  int a = alpha0;
  double t = 0.0;
  while (true) {
    const double rate = q.exit_rate(a);
    if (!(rate > 0.0)) break;  // absorbing state: no further draws
    t += stream.exponential(rate);
    if (t > horizon) break;
    // Target drawn proportionally to the row rates, in stored order.
    double u = stream.uniform01() * rate;
    const std::vector<RateEntry>& row = q.row(a);
    int target = row.back().to;
    for (const RateEntry& e : row) {
      u -= e.rate;
      if (u <= 0.0) {
        target = e.to;
        break;
      }
    }
    path.jump_times.push_back(t);
    path.states.push_back(target);
    a = target;
  }
  return path;
}

Matrix transition_matrix(const GeneratorSpec& q, double t) {
  const int n = q.size();
  if (n == 0) throw DimensionMismatch("empty window");
  if (n > kDenseWindowCap) {
    throw WindowTooLarge("matrix exponential beyond the dense window cap");
  }
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw DimensionMismatch("transition time must be finite and >= 0");
  }
  Matrix p = (t * q.dense()).exp();
  for (int a = 0; a < n; ++a) {
    if (std::abs(p.row(a).sum() - 1.0) > 1e-10) {
      throw SolverFailure("transition matrix rows failed to stay stochastic");
    }
  }
  return p;
}

ErgodicityFit ergodicity_diagnostic(const GeneratorSpec& q,
                                    const std::vector<double>& t_grid) {
  if (t_grid.size() < 2) {
    throw DegenerateWindow("ergodicity fit needs at least two grid times");
  }
  const StationaryDistribution sd = stationary_distribution(q);

  ErgodicityFit fit;
  fit.distances.resize(static_cast<int>(t_grid.size()));
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const Matrix p = transition_matrix(q, t_grid[k]);
    const double d =
        (p.rowwise() - sd.nu.transpose()).cwiseAbs().rowwise().sum().maxCoeff();
    fit.distances[static_cast<int>(k)] = d;
    if (d > 1e-14) {
      xs.push_back(t_grid[k]);
      ys.push_back(std::log(d));
    }
  }

  if (xs.size() < 2) {
    // Equilibrium reached to rounding at every usable grid point.
    fit.lambda0 = std::numeric_limits<double>::infinity();
    fit.prefactor = 0.0;
    return fit;
  }

  const LinearFit lf = linear_fit(
      Eigen::Map<const Vector>(xs.data(), static_cast<int>(xs.size())),
      Eigen::Map<const Vector>(ys.data(), static_cast<int>(ys.size())));
  if (!(-lf.slope > 0.0)) {
    throw FitFailure("sup-row total variation is not decaying on the grid");
  }
  fit.lambda0 = -lf.slope;
  fit.prefactor = std::exp(lf.intercept);
  return fit;
}

double occupation_error_sample(const TwoTimeScaleChain& two_scale, int alpha,
                               const StationaryDistribution& nu,
                               double horizon, RngStream& stream) {
  const GeneratorSpec q = two_scale.composed();
  if (alpha < 0 || alpha >= q.size()) {
    throw MissingState("indicator state outside the retained window");
  }
  if (nu.nu.size() != q.size()) {
    throw DimensionMismatch("stationary vector does not match the window");
  }
  const RegimePath path = sample_path(q, alpha, horizon, stream);
  const double nu_a = nu.nu[alpha];

  // Exact integral of e^{-t} (1{state = alpha} - nu_alpha) over each sojourn.
  double acc = 0.0;
  double t_prev = 0.0;
  int state = path.origin;
  auto add = [&](double s, double e, int st) {
    const double w = std::exp(-s) - std::exp(-e);
    acc += ((st == alpha ? 1.0 : 0.0) - nu_a) * w;
  };
  for (int k = 0; k < path.n_jumps(); ++k) {
    add(t_prev, path.jump_times[k], state);
    t_prev = path.jump_times[k];
    state = path.states[k];
  }
  add(t_prev, horizon, state);
  return acc;
}

}  // namespace hybridlv::chain
