#include "hybridlv/averaging.hpp"

#include <cmath>

namespace hybridlv::averaging {

void refresh_extrema(AveragedCoefficients& avg) {
  avg.r_tilde = avg.r_bar.minCoeff();
  avg.r_hat = avg.r_bar.maxCoeff();
  avg.b_hat = avg.b_bar.minCoeff();
  avg.a_tilde = avg.a_bar.diagonal().minCoeff();
  avg.sigma_tilde = avg.sigma_bar.maxCoeff();
}

AveragedCoefficients average_coefficients(
    const dynamics::CoefficientTable& coeffs,
    const chain::StationaryDistribution& nu, double nu_tail_mass) {
  const int n_states = static_cast<int>(nu.nu.size());
  if (n_states == 0) throw DimensionMismatch("empty stationary vector");
  if (coeffs.n_states() < n_states) {
    throw MissingState("stationary mass on states without coefficients");
  }
  if (!(nu_tail_mass >= 0.0) || nu_tail_mass > 1.0) {
    throw DimensionMismatch("tail mass must lie in [0, 1]");
  }

  const int n = coeffs.n_species;
  AveragedCoefficients avg;
  avg.b_bar = Vector::Zero(n);
  avg.a_bar = Matrix::Zero(n, n);
  Vector var_bar = Vector::Zero(n);
  double sup_entry = 0.0;
  for (int k = 0; k < n_states; ++k) {
    const double w = nu.nu[k];
    avg.b_bar += w * coeffs.b[k];
    avg.a_bar += w * coeffs.a[k];
    var_bar += w * coeffs.sigma[k].array().square().matrix();
    sup_entry = std::max({sup_entry, coeffs.b[k].cwiseAbs().maxCoeff(),
                          coeffs.a[k].cwiseAbs().maxCoeff(),
                          coeffs.sigma[k].array().square().maxCoeff()});
  }
  avg.sigma_bar = var_bar.cwiseSqrt();
  avg.r_bar = dynamics::strat_to_ito(avg.b_bar, avg.sigma_bar);
  avg.tail_bound = nu_tail_mass * sup_entry;
  refresh_extrema(avg);
  return avg;
}

std::pair<Vector, Vector> averaged_drift_diffusion(
    const Eigen::Ref<const Vector>& x, const AveragedCoefficients& avg) {
  if (x.size() != avg.r_bar.size()) {
    throw DimensionMismatch("state vector length mismatch");
  }
  Vector dr = x.array() * (avg.r_bar - avg.a_bar * x).array();
  Vector di = x.array() * avg.sigma_bar.array();
  return {std::move(dr), std::move(di)};
}

dynamics::CoefficientTable one_state_table(const AveragedCoefficients& avg) {
  return dynamics::make_coefficients({avg.b_bar}, {avg.a_bar},
                                     {avg.sigma_bar});
}

}  // namespace hybridlv::averaging
