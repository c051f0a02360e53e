#include <doctest.h>

#include <cmath>

#include "hybridlv/averaging.hpp"
#include "hybridlv/chain.hpp"
#include "hybridlv/common.hpp"
#include "hybridlv/dynamics.hpp"
#include "hybridlv/rng.hpp"

using namespace hybridlv;
using namespace hybridlv::averaging;

namespace {

// Two regimes with unequal tables; weights (2/3, 1/3) give round numbers:
//   b_bar = (1, 1), var_bar = (0.18, 0.24), a_bar = [[4/3, 0.3], [0.2, 5/3]].
dynamics::CoefficientTable two_regime_table() {
  Vector b1(2), b2(2), s1(2), s2(2);
  b1 << 1.5, 0.5;
  b2 << 0.0, 2.0;
  s1 << 0.3, 0.6;
  s2 << 0.6, 0.0;
  Matrix a1(2, 2), a2(2, 2);
  a1 << 1.0, 0.2, 0.1, 2.0;
  a2 << 2.0, 0.5, 0.4, 1.0;
  return dynamics::make_coefficients({b1, b2}, {a1, a2}, {s1, s2});
}

chain::StationaryDistribution two_thirds_one_third() {
  // Stationary law of the two-state chain with rates 1 (up) and 2 (down).
  const chain::GeneratorSpec q =
      chain::build_generator({{{1, 1.0}}, {{0, 2.0}}}, 2, 0.0);
  return chain::stationary_distribution(q);
}

}  // namespace

TEST_CASE("weighted averages match hand-computed values") {
  const AveragedCoefficients avg =
      average_coefficients(two_regime_table(), two_thirds_one_third());

  CHECK(avg.b_bar[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(avg.b_bar[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(avg.sigma_bar[0] == doctest::Approx(std::sqrt(0.18)).epsilon(1e-12));
  CHECK(avg.sigma_bar[1] == doctest::Approx(std::sqrt(0.24)).epsilon(1e-12));
  CHECK(avg.r_bar[0] == doctest::Approx(1.09).epsilon(1e-12));
  CHECK(avg.r_bar[1] == doctest::Approx(1.12).epsilon(1e-12));
  CHECK(avg.a_bar(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(avg.a_bar(0, 1) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(avg.a_bar(1, 0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(avg.a_bar(1, 1) == doctest::Approx(5.0 / 3.0).epsilon(1e-12));

  CHECK(avg.r_tilde == doctest::Approx(1.09).epsilon(1e-12));
  CHECK(avg.r_hat == doctest::Approx(1.12).epsilon(1e-12));
  CHECK(avg.b_hat == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(avg.a_tilde == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(avg.sigma_tilde == doctest::Approx(std::sqrt(0.24)).epsilon(1e-12));
  CHECK(avg.tail_bound == 0.0);
}

TEST_CASE("growth, noise, and corrected rates stay mutually consistent") {
  // The identity r_bar = b_bar + sigma_bar^2 / 2 must hold to rounding, and
  // averaging the per-state corrected rates must give the same answer.
  const dynamics::CoefficientTable t = two_regime_table();
  const chain::StationaryDistribution nu = two_thirds_one_third();
  const AveragedCoefficients avg = average_coefficients(t, nu);

  const double defect = (avg.r_bar.array() - avg.b_bar.array() -
                         0.5 * avg.sigma_bar.array().square())
                            .abs()
                            .maxCoeff();
  CHECK(defect <= 1e-15);

  Vector r_direct = Vector::Zero(2);
  for (int k = 0; k < 2; ++k) r_direct += nu.nu[k] * t.r[k];
  CHECK((avg.r_bar - r_direct).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("tail mass scales the worst-entry bound") {
  // sup entry over both states: |b| max 2.0, |a| max 2.0, sigma^2 max 0.36.
  const AveragedCoefficients avg = average_coefficients(
      two_regime_table(), two_thirds_one_third(), 0.01);
  CHECK(avg.tail_bound == doctest::Approx(0.02).epsilon(1e-12));

  CHECK_THROWS_AS(average_coefficients(two_regime_table(),
                                       two_thirds_one_third(), -0.1),
                  DimensionMismatch);
  CHECK_THROWS_AS(average_coefficients(two_regime_table(),
                                       two_thirds_one_third(), 1.5),
                  DimensionMismatch);
}

TEST_CASE("every state with stationary mass needs coefficients") {
  const chain::GeneratorSpec q3 = chain::build_generator(
      {{{1, 1.0}}, {{0, 1.0}, {2, 1.0}}, {{1, 1.0}}}, 3, 0.0);
  const chain::StationaryDistribution nu3 = chain::stationary_distribution(q3);
  CHECK_THROWS_AS(average_coefficients(two_regime_table(), nu3), MissingState);
}

TEST_CASE("reduced drift and diffusion evaluate the averaged field") {
  const AveragedCoefficients avg =
      average_coefficients(two_regime_table(), two_thirds_one_third());
  Vector x(2);
  x << 1.0, 2.0;
  const auto [dr, di] = averaged_drift_diffusion(x, avg);
  CHECK(dr[0] == doctest::Approx(1.09 - (4.0 / 3.0 + 0.6)).epsilon(1e-12));
  CHECK(dr[1] == doctest::Approx(2.0 * (1.12 - (0.2 + 10.0 / 3.0)))
                     .epsilon(1e-12));
  CHECK(di[0] == doctest::Approx(std::sqrt(0.18)).epsilon(1e-12));
  CHECK(di[1] == doctest::Approx(2.0 * std::sqrt(0.24)).epsilon(1e-12));
  CHECK_THROWS_AS(averaged_drift_diffusion(Vector::Ones(3), avg),
                  DimensionMismatch);
}

TEST_CASE("the one-state table carries the averaged system unchanged") {
  const AveragedCoefficients avg =
      average_coefficients(two_regime_table(), two_thirds_one_third());
  const dynamics::CoefficientTable t = one_state_table(avg);
  REQUIRE(t.n_states() == 1);
  CHECK((t.b[0].array() == avg.b_bar.array()).all());
  CHECK((t.sigma[0].array() == avg.sigma_bar.array()).all());
  CHECK((t.a[0].array() == avg.a_bar.array()).all());
  CHECK((t.r[0] - avg.r_bar).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("scalar extrema refresh from hand-built vectors") {
  AveragedCoefficients avg;
  avg.r_bar = Vector(3);
  avg.r_bar << 0.5, -1.0, 2.0;
  avg.b_bar = Vector(3);
  avg.b_bar << 0.4, -1.2, 1.9;
  avg.sigma_bar = Vector(3);
  avg.sigma_bar << 0.1, 0.7, 0.3;
  avg.a_bar = Matrix::Identity(3, 3) * 2.0;
  avg.a_bar(2, 2) = 0.5;
  refresh_extrema(avg);
  CHECK(avg.r_tilde == -1.0);
  CHECK(avg.r_hat == 2.0);
  CHECK(avg.b_hat == -1.2);
  CHECK(avg.a_tilde == 0.5);
  CHECK(avg.sigma_tilde == 0.7);
}

TEST_CASE("reduced simulation is the hybrid integrator on one state") {
  const AveragedCoefficients avg =
      average_coefficients(two_regime_table(), two_thirds_one_third());
  Vector x0(2);
  x0 << 0.5, 0.8;
  const dynamics::SimScheme scheme;
  const dynamics::HybridTrajectory a =
      dynamics::simulate_averaged(avg, x0, 1.0, scheme, RngStream(42));
  const dynamics::HybridTrajectory b = dynamics::simulate_hybrid(
      one_state_table(avg), chain::GeneratorSpec::zero(1), 0, x0, 1.0, scheme,
      RngStream(42));
  CHECK((a.x.array() == b.x.array()).all());
  CHECK((a.regimes.array() == 0).all());
  CHECK(a.x.minCoeff() > 0.0);
}
