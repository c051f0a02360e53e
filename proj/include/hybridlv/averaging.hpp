#pragma once

#include <utility>

#include "hybridlv/chain.hpp"
#include "hybridlv/common.hpp"
#include "hybridlv/dynamics.hpp"

namespace hybridlv::averaging {

// Coefficients of the reduced single-regime system obtained by weighting
// the per-state tables with a stationary distribution. The consistency
// identity r_bar = b_bar + sigma_bar^2 / 2 holds by construction because
// sigma_bar is the root of the averaged variance, not the averaged sigma.
struct AveragedCoefficients {
  Vector r_bar;
  Vector b_bar;
  Vector sigma_bar;
  Matrix a_bar;

  double r_tilde = 0.0;  // min_i r_bar_i
  double r_hat = 0.0;    // max_i r_bar_i
  double b_hat = 0.0;    // min_i b_bar_i
  double a_tilde = 0.0;  // min_i a_bar_ii
  double sigma_tilde = 0.0;  // max_i sigma_bar_i

  // Worst-case perturbation of any averaged entry from stationary mass
  // outside the retained window.
  double tail_bound = 0.0;
};

// Recomputes the scalar extrema from the vectors. Needed after building an
// AveragedCoefficients by hand (tests, hypothetical parameter studies).
void refresh_extrema(AveragedCoefficients& avg);

// nu-weighted averages over the retained states. The coefficient table must
// cover every state the distribution puts mass on. nu_tail_mass is the
// stationary mass of the untruncated chain beyond the window (0 when the
// window is exact); it scales the reported tail_bound.
AveragedCoefficients average_coefficients(
    const dynamics::CoefficientTable& coeffs,
    const chain::StationaryDistribution& nu, double nu_tail_mass = 0.0);

// Drift and diffusion diagonal of the reduced system at x.
std::pair<Vector, Vector> averaged_drift_diffusion(
    const Eigen::Ref<const Vector>& x, const AveragedCoefficients& avg);

// One-state coefficient table carrying the averaged system, for reuse of the
// hybrid integrator.
dynamics::CoefficientTable one_state_table(const AveragedCoefficients& avg);

}  // namespace hybridlv::averaging
