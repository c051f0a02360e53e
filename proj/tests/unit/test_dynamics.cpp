#include <doctest.h>

#include <cmath>
#include <vector>

#include "hybridlv/chain.hpp"
#include "hybridlv/common.hpp"
#include "hybridlv/dynamics.hpp"
#include "hybridlv/rng.hpp"

using namespace hybridlv;
using namespace hybridlv::dynamics;

namespace {

CoefficientTable logistic_table(double b, double a, double sigma) {
  return make_coefficients({Vector::Constant(1, b)},
                           {Matrix::Constant(1, 1, a)},
                           {Vector::Constant(1, sigma)});
}

// Logistic ODE solution for x' = x (b - a x).
double logistic_exact(double b, double a, double x0, double t) {
  const double e = std::exp(b * t);
  return b * x0 * e / (b + a * x0 * (e - 1.0));
}

}  // namespace

TEST_CASE("drift correction adds half the squared noise") {
  Vector b(2), sigma(2);
  b << 1.5, -0.5;
  sigma << 1.0, 2.0;
  const Vector r = strat_to_ito(b, sigma);
  CHECK(r[0] == 2.0);
  CHECK(r[1] == 1.5);
  CHECK_THROWS_AS(strat_to_ito(Vector::Ones(2), Vector::Ones(3)),
                  DimensionMismatch);
}

TEST_CASE("coefficient tables validate shapes and derive growth rates") {
  Vector b(2), sigma(2);
  b << 1.0, 2.0;
  sigma << 0.2, 0.4;
  Matrix a(2, 2);
  a << 1.0, 0.5, 0.2, 1.0;
  const CoefficientTable t = make_coefficients({b}, {a}, {sigma});
  CHECK(t.n_species == 2);
  CHECK(t.n_states() == 1);
  CHECK(t.r[0][0] == doctest::Approx(1.02).epsilon(1e-15));
  CHECK(t.r[0][1] == doctest::Approx(2.08).epsilon(1e-15));

  CHECK_THROWS_AS(make_coefficients({b}, {Matrix::Ones(3, 3)}, {sigma}),
                  DimensionMismatch);
  CHECK_THROWS_AS(make_coefficients({b, b}, {a}, {sigma}),
                  DimensionMismatch);
}

TEST_CASE("drift and diffusion match hand-computed values") {
  Vector b(2), sigma(2);
  b << 0.955, 1.92;
  sigma << 0.3, 0.4;
  Matrix a(2, 2);
  a << 1.0, 0.5, 0.2, 1.0;
  // r = (1.0, 2.0) after the Ito correction.
  const CoefficientTable t = make_coefficients({b}, {a}, {sigma});
  Vector x(2);
  x << 1.0, 2.0;
  const Vector d = drift(x, 0, t);
  CHECK(d[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(-0.4).epsilon(1e-12));
  const Vector s = diffusion_diag(x, 0, t);
  CHECK(s[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(0.8).epsilon(1e-15));
  const Matrix sm = diffusion(x, 0, t);
  CHECK(sm(0, 1) == 0.0);
  CHECK(sm(1, 1) == doctest::Approx(0.8).epsilon(1e-15));

  CHECK_THROWS_AS(drift(x, 1, t), MissingState);
}

TEST_CASE("initial states must be strictly positive and finite") {
  const CoefficientTable t = logistic_table(1.0, 1.0, 0.1);
  const chain::GeneratorSpec q = chain::GeneratorSpec::zero(1);
  const SimScheme scheme;
  CHECK_THROWS_AS(simulate_hybrid(t, q, 0, Vector::Zero(1), 1.0, scheme,
                                  RngStream(1)),
                  InvalidInitial);
  CHECK_THROWS_AS(simulate_hybrid(t, q, 0, Vector::Constant(1, -0.5), 1.0,
                                  scheme, RngStream(1)),
                  InvalidInitial);
  Vector nan0 = Vector::Constant(1, std::nan(""));
  CHECK_THROWS_AS(simulate_hybrid(t, q, 0, nan0, 1.0, scheme, RngStream(1)),
                  InvalidInitial);
}

TEST_CASE("the grid ends at the first step multiple covering the horizon") {
  const CoefficientTable t = logistic_table(1.0, 1.0, 0.0);
  SimScheme scheme;
  scheme.dt = 0.1;
  const HybridTrajectory traj =
      simulate_hybrid(t, chain::GeneratorSpec::zero(1), 0,
                      Vector::Constant(1, 0.5), 0.35, scheme, RngStream(2));
  CHECK(traj.n_points() == 5);
  CHECK(traj.times[4] == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("same stream reproduces the trajectory exactly") {
  Vector b(2), sigma(2);
  b << 1.0, 0.5;
  sigma << 0.4, 0.3;
  Matrix a(2, 2);
  a << 1.0, 0.1, 0.2, 0.8;
  const CoefficientTable t = make_coefficients({b, b}, {a, a}, {sigma, sigma});
  const chain::GeneratorSpec q =
      chain::build_generator({{{1, 1.0}}, {{0, 2.0}}}, 2, 0.0);
  Vector x0(2);
  x0 << 0.5, 0.7;
  const SimScheme scheme;
  const HybridTrajectory t1 =
      simulate_hybrid(t, q, 0, x0, 2.0, scheme, RngStream(99));
  const HybridTrajectory t2 =
      simulate_hybrid(t, q, 0, x0, 2.0, scheme, RngStream(99));
  CHECK((t1.x.array() == t2.x.array()).all());
  CHECK((t1.times.array() == t2.times.array()).all());
  CHECK((t1.regimes.array() == t2.regimes.array()).all());
  CHECK(t1.regime_path.jump_times == t2.regime_path.jump_times);
}

TEST_CASE("populations stay positive under stress") {
  Vector b(2), sigma(2);
  b << 3.0, -2.0;
  sigma << 2.0, 1.5;
  Matrix a(2, 2);
  a << 1.0, 0.9, 0.9, 1.0;
  const CoefficientTable t = make_coefficients({b, b}, {a, a}, {sigma, sigma});
  const chain::GeneratorSpec q =
      chain::build_generator({{{1, 50.0}}, {{0, 50.0}}}, 2, 0.0);
  Vector x0(2);
  x0 << 1e-8, 1e3;
  const SimScheme scheme;
  const HybridTrajectory traj =
      simulate_hybrid(t, q, 0, x0, 2.0, scheme, RngStream(7));
  CHECK_FALSE(traj.clamped);
  CHECK(traj.x.minCoeff() > 0.0);
  CHECK(traj.x.allFinite());
}

TEST_CASE("deterministic logistic run converges to the closed form") {
  const double b = 1.0, a = 1.0, x0 = 0.1;
  const CoefficientTable t = logistic_table(b, a, 0.0);
  SimScheme scheme;
  scheme.dt = 1e-4;
  const HybridTrajectory traj =
      simulate_hybrid(t, chain::GeneratorSpec::zero(1), 0,
                      Vector::Constant(1, x0), 5.0, scheme, RngStream(3));
  const int last = traj.n_points() - 1;
  CHECK(std::abs(traj.x(last, 0) - logistic_exact(b, a, x0, 5.0)) < 1e-3);
  // Halving the step must at least halve the terminal defect (first-order
  // deterministic convergence of the log-space update).
  SimScheme fine;
  fine.dt = 5e-5;
  const HybridTrajectory traj2 =
      simulate_hybrid(t, chain::GeneratorSpec::zero(1), 0,
                      Vector::Constant(1, x0), 5.0, fine, RngStream(3));
  const double e1 =
      std::abs(traj.x(last, 0) - logistic_exact(b, a, x0, 5.0));
  const double e2 = std::abs(traj2.x(traj2.n_points() - 1, 0) -
                             logistic_exact(b, a, x0, 5.0));
  CHECK(e2 < 0.75 * e1);
}

TEST_CASE("noise-free growth reconstructs the Brownian-free update exactly") {
  // With a == 0 the log update is linear; replaying the Brownian substream
  // must reproduce the terminal value to rounding.
  const double b = 0.05, sigma = 0.3, x0 = 2.0, horizon = 1.0;
  const CoefficientTable t = logistic_table(b, 0.0, sigma);
  SimScheme scheme;
  scheme.dt = 1e-3;
  RngStream stream(1234);
  const HybridTrajectory traj =
      simulate_hybrid(t, chain::GeneratorSpec::zero(1), 0,
                      Vector::Constant(1, x0), horizon, scheme, stream);

  RngStream replay = RngStream(1234).substream(2);
  const int n_steps = traj.n_points() - 1;
  double y = std::log(x0);
  for (int k = 0; k < n_steps; ++k) {
    y += b * scheme.dt + sigma * std::sqrt(scheme.dt) * replay.normal();
  }
  CHECK(std::abs(std::log(traj.x(n_steps, 0)) - y) < 1e-12);
}

TEST_CASE("noise-free growth matches the lognormal law in distribution") {
  const double b = 0.1, sigma = 0.5, x0 = 1.0, horizon = 1.0;
  const CoefficientTable t = logistic_table(b, 0.0, sigma);
  SimScheme scheme;
  scheme.dt = 1e-3;
  const int n = 4000;
  double sum = 0.0, sumsq = 0.0;
  for (int k = 0; k < n; ++k) {
    RngStream stream(777 ^ static_cast<std::uint64_t>(k));
    const HybridTrajectory traj =
        simulate_hybrid(t, chain::GeneratorSpec::zero(1), 0,
                        Vector::Constant(1, x0), horizon, scheme, stream);
    const double y = std::log(traj.x(traj.n_points() - 1, 0));
    sum += y;
    sumsq += y * y;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  // log x_T is exactly N(log x0 + b T, sigma^2 T) for this scheme.
  const double se_mean = sigma / std::sqrt(static_cast<double>(n));
  const double se_var =
      sigma * sigma * std::sqrt(2.0 / static_cast<double>(n));
  CHECK(std::abs(mean - (std::log(x0) + b * horizon)) < 3.0 * se_mean);
  CHECK(std::abs(var - sigma * sigma * horizon) < 3.0 * se_var);
}

TEST_CASE("strong error halves with the step for the noisy logistic") {
  // The log-coordinate update has additive noise, so refining dt on a fixed
  // Brownian path contracts the strong error at first order. The reference
  // uses dt/64; coarse grids consume block sums of the fine increments.
  const double b = 1.0, a = 1.0, sigma = 0.4, x0 = 0.3, horizon = 1.0;
  const int fine_per_coarse = 64;
  const double dt = 0.02;
  const double dt_fine = dt / fine_per_coarse;
  const int n_coarse = static_cast<int>(std::llround(horizon / dt));

  auto advance = [&](double y, double step, double dw) {
    return y + (b - a * std::exp(y)) * step + sigma * dw;
  };

  const int n_paths = 200;
  double err1 = 0.0, err2 = 0.0;
  for (int p = 0; p < n_paths; ++p) {
    RngStream stream(5000 ^ static_cast<std::uint64_t>(p));
    std::vector<double> dw(n_coarse * fine_per_coarse);
    for (double& v : dw) v = std::sqrt(dt_fine) * stream.normal();

    double y_ref = std::log(x0);
    for (double v : dw) y_ref = advance(y_ref, dt_fine, v);

    auto coarse_run = [&](int block) {
      double y = std::log(x0);
      const int n_blocks = static_cast<int>(dw.size()) / block;
      for (int k = 0; k < n_blocks; ++k) {
        double w = 0.0;
        for (int j = 0; j < block; ++j) w += dw[k * block + j];
        y = advance(y, block * dt_fine, w);
      }
      return y;
    };
    err1 += std::abs(coarse_run(fine_per_coarse) - y_ref);
    err2 += std::abs(coarse_run(fine_per_coarse / 2) - y_ref);
  }
  const double ratio = err1 / err2;
  CHECK(ratio > 1.3);
  CHECK(ratio < 2.8);
}

TEST_CASE("regime grid uses the pre-jump state at snapped instants") {
  const chain::GeneratorSpec q =
      chain::build_generator({{{1, 2.0}}, {{0, 3.0}}}, 2, 0.0);
  const CoefficientTable t = make_coefficients(
      {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)},
      {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0)},
      {Vector::Constant(1, 0.1), Vector::Constant(1, 0.2)});
  SimScheme scheme;
  scheme.dt = 0.01;
  const HybridTrajectory traj =
      simulate_hybrid(t, q, 0, Vector::Constant(1, 1.0), 10.0, scheme,
                      RngStream(88));
  REQUIRE(traj.regime_path.n_jumps() > 5);
  for (int k = 0; k < traj.n_points(); ++k) {
    CHECK(traj.regimes[k] == traj.regime_path.state_before(traj.times[k]));
  }
  // Each jump takes effect exactly at the next grid index; when several
  // jumps share one grid cell only the last one is visible there.
  for (int j = 0; j < traj.regime_path.n_jumps(); ++j) {
    const int idx = static_cast<int>(
        std::ceil(traj.regime_path.jump_times[j] / scheme.dt));
    const bool last_in_cell =
        j + 1 == traj.regime_path.n_jumps() ||
        std::ceil(traj.regime_path.jump_times[j + 1] / scheme.dt) > idx;
    if (last_in_cell && idx + 1 < traj.n_points()) {
      CHECK(traj.regimes[idx] == traj.regime_path.states[j]);
    }
  }
}

TEST_CASE("two-scale overload equals simulating the composed generator") {
  const chain::GeneratorSpec fast =
      chain::build_generator({{{1, 1.0}}, {{0, 2.0}}}, 2, 0.0);
  const chain::GeneratorSpec slow =
      chain::build_generator({{{1, 0.3}}, {}}, 2, 0.0);
  const chain::TwoTimeScaleChain ts{fast, slow, 0.2};
  const CoefficientTable t = make_coefficients(
      {Vector::Constant(1, 1.0), Vector::Constant(1, 0.5)},
      {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0)},
      {Vector::Constant(1, 0.2), Vector::Constant(1, 0.3)});
  const SimScheme scheme;
  const Vector x0 = Vector::Constant(1, 0.5);
  const HybridTrajectory a =
      simulate_hybrid(t, ts, 0, x0, 1.0, scheme, RngStream(4));
  const HybridTrajectory b =
      simulate_hybrid(t, ts.composed(), 0, x0, 1.0, scheme, RngStream(4));
  CHECK((a.x.array() == b.x.array()).all());
  CHECK((a.regimes.array() == b.regimes.array()).all());
}

TEST_CASE("runaway log magnitudes truncate and mark the trajectory") {
  const CoefficientTable t = logistic_table(5.0, 0.0, 0.0);
  SimScheme scheme;
  scheme.dt = 0.01;
  scheme.log_clamp = 3.03;  // crossed strictly between grid values of log x
  const HybridTrajectory traj =
      simulate_hybrid(t, chain::GeneratorSpec::zero(1), 0,
                      Vector::Constant(1, 1.0), 10.0, scheme, RngStream(6));
  CHECK(traj.clamped);
  CHECK(traj.clamp_time == doctest::Approx(0.61).epsilon(1e-12));
  CHECK(traj.n_points() == 61);
  CHECK(traj.x.array().log().abs().maxCoeff() <= scheme.log_clamp);
  CHECK(traj.times[traj.n_points() - 1] ==
        doctest::Approx(traj.clamp_time - scheme.dt).epsilon(1e-12));
}

TEST_CASE("windows larger than the coefficient table are rejected") {
  const CoefficientTable t = logistic_table(1.0, 1.0, 0.1);
  const chain::GeneratorSpec q = chain::GeneratorSpec::zero(2);
  CHECK_THROWS_AS(simulate_hybrid(t, q, 0, Vector::Constant(1, 1.0), 1.0,
                                  SimScheme{}, RngStream(1)),
                  MissingState);
}
