#pragma once

#include <vector>

#include "hybridlv/common.hpp"
#include "hybridlv/rng.hpp"

namespace hybridlv::chain {

// One off-diagonal rate q(from -> to). States are 0-based indices into the
// retained window.
struct RateEntry {
  int to = 0;
  double rate = 0.0;
};

// Conservative generator on a finite window of a countable-state chain.
// Only off-diagonal rates are stored; each diagonal entry is minus the sum
// of its row, taken in the stored order, so row_sum() returns exactly 0.0.
// Rates pointing outside the window at construction time are dropped
// (reflecting repair) and accounted for in tail_mass_bound().
class GeneratorSpec {
 public:
  GeneratorSpec() = default;

  int size() const { return static_cast<int>(rows_.size()); }
  const std::vector<RateEntry>& row(int a) const { return rows_[a]; }
  double exit_rate(int a) const { return exit_[a]; }
  // sup over retained states of the total exit rate.
  double max_exit_rate() const;
  double tail_mass_bound() const { return tail_bound_; }

  // Off-diagonal lookup; 0 when absent, -exit_rate on the diagonal.
  double rate(int from, int to) const;

  // Row sum in the canonical stored order; identically 0.0 by construction.
  double row_sum(int a) const;

  Matrix dense() const;

  static GeneratorSpec zero(int n);

  friend GeneratorSpec build_generator(
      const std::vector<std::vector<RateEntry>>& rate_rows, int trunc_size,
      double tail_tol);
  friend GeneratorSpec compose_two_time_scale(const GeneratorSpec& fast,
                                              const GeneratorSpec& slow,
                                              double epsilon);

 private:
  std::vector<std::vector<RateEntry>> rows_;  // sorted by target, merged
  Vector exit_;
  double tail_bound_ = 0.0;
};

// Assembles a window generator from per-state off-diagonal rate lists.
// Entries with targets outside [0, trunc_size) are dropped and their total
// per-row rate tracked; construction fails with TailMassExceeded when any
// row loses more than tail_tol. Negative rates and self-loops are rejected.
GeneratorSpec build_generator(
    const std::vector<std::vector<RateEntry>>& rate_rows, int trunc_size,
    double tail_tol);

// Entrywise fast/epsilon + slow on a shared window.
GeneratorSpec compose_two_time_scale(const GeneratorSpec& fast,
                                     const GeneratorSpec& slow,
                                     double epsilon);

// Fast and slow parts kept separate so the same pair can be composed at
// several time-scale separations.
struct TwoTimeScaleChain {
  GeneratorSpec fast;
  GeneratorSpec slow;
  double epsilon = 1.0;

  GeneratorSpec composed() const {
    return compose_two_time_scale(fast, slow, epsilon);
  }
};

struct StationaryDistribution {
  Vector nu;
  double residual = 0.0;  // max-norm of nu^T Q after the solve
};

// True when the window is one strongly connected class.
bool is_irreducible(const GeneratorSpec& q);

// Solves nu Q = 0, sum(nu) = 1 on the window. Requires irreducibility;
// the residual must meet tol and every entry must be strictly positive.
StationaryDistribution stationary_distribution(const GeneratorSpec& q,
                                               double tol = 1e-10);

// Piecewise-constant regime path: origin state at time 0, then the state
// entered at each jump time. Paths are right-continuous.
struct RegimePath {
  int origin = 0;
  std::vector<double> jump_times;
  std::vector<int> states;

  int n_jumps() const { return static_cast<int>(jump_times.size()); }
  // State at time t (a jump at exactly t counts).
  int state_at(double t) const;
  // Left limit: state just before t.
  int state_before(double t) const;
};

// Jump-chain sampler: exponential holding time at the current exit rate,
// then a target drawn proportionally to the row rates. A state with zero
// exit rate is absorbing and ends the draw sequence.
RegimePath sample_path(const GeneratorSpec& q, int alpha0, double horizon,
                       RngStream& stream);

// exp(t Q) on the window. Throws WindowTooLarge above 500 states and
// SolverFailure if the result's rows fail to sum to 1 within 1e-10.
Matrix transition_matrix(const GeneratorSpec& q, double t);

struct ErgodicityFit {
  double lambda0 = 0.0;   // fitted exponential decay rate of the sup-row TV
  double prefactor = 0.0; // fitted constant in front of exp(-lambda0 t)
  Vector distances;       // sup-row total-variation distance per grid time
};

// Fits sup_a sum_b |p_ab(t) - nu_b| ~ K exp(-lambda0 t) over the grid.
// Distances below 1e-14 are excluded from the fit; if every grid point is
// below that floor the decay is reported as +infinity. A nonpositive fitted
// rate throws FitFailure.
ErgodicityFit ergodicity_diagnostic(const GeneratorSpec& q,
                                    const std::vector<double>& t_grid);

// One sample of integral_0^horizon e^{-t} (1{alpha(t) = alpha} - nu_alpha) dt
// along a freshly sampled path of the composed chain, evaluated exactly on
// each sojourn interval. The path starts in state alpha.
double occupation_error_sample(const TwoTimeScaleChain& two_scale, int alpha,
                               const StationaryDistribution& nu,
                               double horizon, RngStream& stream);

}  // namespace hybridlv::chain
