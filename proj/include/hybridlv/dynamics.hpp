#pragma once

#include <vector>

#include "hybridlv/chain.hpp"
#include "hybridlv/common.hpp"
#include "hybridlv/rng.hpp"

namespace hybridlv::averaging {
struct AveragedCoefficients;
}

namespace hybridlv::dynamics {

// Per-regime coefficients of the competitive system
//   dx_i = x_i [ (r_i(a) - sum_j a_ij(a) x_j) dt + sigma_i(a) dw_i ].
// r is derived, never stored independently: r_i = b_i + sigma_i^2 / 2, the
// drift correction that turns the Stratonovich rates b into Ito form.
struct CoefficientTable {
  int n_species = 0;
  std::vector<Vector> b;      // Stratonovich growth rates, one per state
  std::vector<Vector> sigma;  // noise intensities, one per state
  std::vector<Vector> r;      // Ito growth rates, derived
  std::vector<Matrix> a;      // interaction matrices, one per state

  int n_states() const { return static_cast<int>(b.size()); }
};

// r_i = b_i + sigma_i^2 / 2 componentwise.
Vector strat_to_ito(const Eigen::Ref<const Vector>& b,
                    const Eigen::Ref<const Vector>& sigma);

// Validates shapes, derives r. Competitiveness (a_ii > 0, a_ij >= 0) is not
// enforced here so that degenerate validation systems (a == 0) can be built;
// scenario loading rejects non-competitive input before simulation.
CoefficientTable make_coefficients(std::vector<Vector> b,
                                   std::vector<Matrix> a,
                                   std::vector<Vector> sigma);

// x_i (r_i(alpha) - sum_j a_ij(alpha) x_j), the Ito drift at state alpha.
Vector drift(const Eigen::Ref<const Vector>& x, int alpha,
             const CoefficientTable& coeffs);

// Diagonal of the diffusion matrix: x_i sigma_i(alpha).
Vector diffusion_diag(const Eigen::Ref<const Vector>& x, int alpha,
                      const CoefficientTable& coeffs);

// Full (diagonal) diffusion matrix.
Matrix diffusion(const Eigen::Ref<const Vector>& x, int alpha,
                 const CoefficientTable& coeffs);

struct SimScheme {
  double dt = 1e-3;
  // Bound on |log x_i|; a step crossing it truncates the trajectory.
  double log_clamp = 700.0;
};

// Trajectory on the uniform grid t_k = k dt. Row k of x is the state at
// t_k; regimes[k] is the regime in force on [t_k, t_k + dt), which equals
// the pre-jump state alpha(t-) at grid times since jumps are snapped to the
// next grid point. On a clamp hit the arrays are truncated to the last
// valid point and the trajectory is marked.
struct HybridTrajectory {
  Vector times;
  Matrix x;
  IndexVector regimes;
  chain::RegimePath regime_path;
  bool clamped = false;
  double clamp_time = -1.0;

  int n_points() const { return static_cast<int>(times.size()); }
};

// Interlaced positivity-preserving integrator: the regime path is sampled
// first (its own substream), then log populations advance by Euler steps
//   y_i += (b_i(a) - sum_j a_ij(a) x_j) dt + sigma_i(a) sqrt(dt) Z_i
// between snapped jump times, with x = exp(y) never leaving (0, inf).
HybridTrajectory simulate_hybrid(const CoefficientTable& coeffs,
                                 const chain::GeneratorSpec& q, int alpha0,
                                 const Eigen::Ref<const Vector>& x0,
                                 double horizon, const SimScheme& scheme,
                                 RngStream stream);

HybridTrajectory simulate_hybrid(const CoefficientTable& coeffs,
                                 const chain::TwoTimeScaleChain& two_scale,
                                 int alpha0,
                                 const Eigen::Ref<const Vector>& x0,
                                 double horizon, const SimScheme& scheme,
                                 RngStream stream);

// Single-regime run of the averaged system. Pathwise identical to
// simulate_hybrid on a one-state chain with the same coefficients and stream.
HybridTrajectory simulate_averaged(const averaging::AveragedCoefficients& avg,
                                   const Eigen::Ref<const Vector>& x0,
                                   double horizon, const SimScheme& scheme,
                                   RngStream stream);

}  // namespace hybridlv::dynamics
