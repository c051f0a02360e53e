#include "hybridlv/dynamics.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "hybridlv/averaging.hpp"

namespace hybridlv::dynamics {

namespace {

// Substream tags inside one trajectory stream. The regime path and the
// Brownian increments never share draws, so freezing the chain leaves the
// Brownian sequence untouched.
constexpr std::uint64_t kRegimeTag = 1;
constexpr std::uint64_t kBrownianTag = 2;

void check_state(int alpha, int n_states) {
  if (alpha < 0 || alpha >= n_states) {
    std::ostringstream msg;
    msg << "regime state " << alpha << " has no coefficients (table holds "
        << n_states << ")";
    throw MissingState(msg.str());
  }
}

}  // namespace

Vector strat_to_ito(const Eigen::Ref<const Vector>& b,
                    const Eigen::Ref<const Vector>& sigma) {
  if (b.size() != sigma.size()) {
    throw DimensionMismatch("growth and noise vectors differ in length");
  }
  return b.array() + 0.5 * sigma.array().square();
}

CoefficientTable make_coefficients(std::vector<Vector> b,
                                   std::vector<Matrix> a,
                                   std::vector<Vector> sigma) {
  if (b.empty() || b.size() != a.size() || b.size() != sigma.size()) {
    throw DimensionMismatch("coefficient lists differ in state count");
  }
  const int n = static_cast<int>(b.front().size());
  if (n <= 0) throw DimensionMismatch("no species");
  CoefficientTable t;
  t.n_species = n;
  t.r.reserve(b.size());
  for (std::size_t k = 0; k < b.size(); ++k) {
    if (b[k].size() != n || sigma[k].size() != n || a[k].rows() != n ||
        a[k].cols() != n) {
      throw DimensionMismatch("coefficient shapes differ across states");
    }
    t.r.push_back(strat_to_ito(b[k], sigma[k]));
  }
  t.b = std::move(b);
  t.a = std::move(a);
  t.sigma = std::move(sigma);
  return t;
}

Vector drift(const Eigen::Ref<const Vector>& x, int alpha,
             const CoefficientTable& coeffs) {
  check_state(alpha, coeffs.n_states());
  if (x.size() != coeffs.n_species) {
    throw DimensionMismatch("state vector length mismatch");
  }
  return x.array() * (coeffs.r[alpha] - coeffs.a[alpha] * x).array();
}

Vector diffusion_diag(const Eigen::Ref<const Vector>& x, int alpha,
                      const CoefficientTable& coeffs) {
  check_state(alpha, coeffs.n_states());
  if (x.size() != coeffs.n_species) {
    throw DimensionMismatch("state vector length mismatch");
  }
  return x.array() * coeffs.sigma[alpha].array();
}

Matrix diffusion(const Eigen::Ref<const Vector>& x, int alpha,
                 const CoefficientTable& coeffs) {
  return diffusion_diag(x, alpha, coeffs).asDiagonal();
}

HybridTrajectory simulate_hybrid(const CoefficientTable& coeffs,
                                 const chain::GeneratorSpec& q, int alpha0,
                                 const Eigen::Ref<const Vector>& x0,
                                 double horizon, const SimScheme& scheme,
                                 RngStream stream) {
  const int n = coeffs.n_species;
  check_state(alpha0, coeffs.n_states());
  if (q.size() > coeffs.n_states()) {
    throw MissingState("window has states beyond the coefficient table");
  }
  if (x0.size() != n) throw DimensionMismatch("initial state length mismatch");
  for (int i = 0; i < n; ++i) {
    if (!(x0[i] > 0.0) || !std::isfinite(x0[i])) {
      throw InvalidInitial("initial populations must be positive and finite");
    }
  }
  if (!(scheme.dt > 0.0)) throw DimensionMismatch("step size must be positive");
  if (!(horizon >= 0.0)) throw DimensionMismatch("negative horizon");

  const double dt = scheme.dt;
  const int n_steps = static_cast<int>(std::ceil(horizon / dt - 1e-9));
  const double sqrt_dt = std::sqrt(dt);

  RngStream regime_stream = stream.substream(kRegimeTag);
  RngStream brownian_stream = stream.substream(kBrownianTag);

  HybridTrajectory traj;
  traj.regime_path =
      chain::sample_path(q, alpha0, n_steps * dt, regime_stream);

  // Jumps take effect at the next grid point at or after the jump time, so
  // regimes[k] is the pre-jump state alpha(t_k-) of the snapped path.
  IndexVector regimes(n_steps + 1);
  {
    int a = traj.regime_path.origin;
    int next_jump = 0;
    const auto& jt = traj.regime_path.jump_times;
    const auto& js = traj.regime_path.states;
    for (int k = 0; k <= n_steps; ++k) {
      while (next_jump < static_cast<int>(jt.size()) &&
             std::ceil(jt[next_jump] / dt) <= static_cast<double>(k)) {
        a = js[next_jump];
        ++next_jump;
      }
      regimes[k] = a;
    }
  }

  Vector times(n_steps + 1);
  Matrix xs(n_steps + 1, n);
  Vector y = x0.array().log();
  Vector x = x0;
  Vector z(n);
  times[0] = 0.0;
  xs.row(0) = x0.transpose();

  int last = n_steps;
  for (int k = 0; k < n_steps; ++k) {
    const int a = regimes[k];
    check_state(a, coeffs.n_states());
    for (int i = 0; i < n; ++i) z[i] = brownian_stream.normal();
    y.array() += (coeffs.b[a] - coeffs.a[a] * x).array() * dt +
                 coeffs.sigma[a].array() * (sqrt_dt * z.array());

    if (y.cwiseAbs().maxCoeff() > scheme.log_clamp) {
      traj.clamped = true;
      traj.clamp_time = (k + 1) * dt;
      last = k;
      break;
    }
    x = y.array().exp();
    times[k + 1] = (k + 1) * dt;
    xs.row(k + 1) = x.transpose();
  }

  traj.times = times.head(last + 1);
  traj.x = xs.topRows(last + 1);
  traj.regimes = regimes.head(last + 1);
  return traj;
}

HybridTrajectory simulate_hybrid(const CoefficientTable& coeffs,
                                 const chain::TwoTimeScaleChain& two_scale,
                                 int alpha0,
                                 const Eigen::Ref<const Vector>& x0,
                                 double horizon, const SimScheme& scheme,
                                 RngStream stream) {
  return simulate_hybrid(coeffs, two_scale.composed(), alpha0, x0, horizon,
                         scheme, stream);
}

HybridTrajectory simulate_averaged(const averaging::AveragedCoefficients& avg,
                                   const Eigen::Ref<const Vector>& x0,
                                   double horizon, const SimScheme& scheme,
                                   RngStream stream) {
  return simulate_hybrid(averaging::one_state_table(avg),
                         chain::GeneratorSpec::zero(1), 0, x0, horizon, scheme,
                         stream);
}

}  // namespace hybridlv::dynamics
