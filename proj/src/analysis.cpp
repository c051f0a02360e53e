#include "hybridlv/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hybridlv::analysis {

namespace lyapunov {

LyapunovFunction power_sum(double p) {
  if (!(p > 0.0)) throw DimensionMismatch("power must be positive");
  LyapunovFunction f;
  std::ostringstream label;
  label << "power_sum(p=" << p << ")";
  f.label = label.str();
  f.value = [p](const Vector& x) { return x.array().pow(p).sum(); };
  f.gradient = [p](const Vector& x) -> Vector {
    return p * x.array().pow(p - 1.0);
  };
  f.hessian_diag = [p](const Vector& x) -> Vector {
    return p * (p - 1.0) * x.array().pow(p - 2.0);
  };
  return f;
}

LyapunovFunction barrier(double g) {
  if (!(g > 0.0) || !(g < 1.0)) {
    throw DimensionMismatch("barrier exponent must lie in (0, 1)");
  }
  LyapunovFunction f;
  std::ostringstream label;
  label << "barrier(g=" << g << ")";
  f.label = label.str();
  f.value = [g](const Vector& x) {
    return (x.array().pow(g) - 1.0 - g * x.array().log()).sum();
  };
  f.gradient = [g](const Vector& x) -> Vector {
    return g * x.array().pow(g - 1.0) - g / x.array();
  };
  f.hessian_diag = [g](const Vector& x) -> Vector {
    return g * (g - 1.0) * x.array().pow(g - 2.0) + g / x.array().square();
  };
  return f;
}

LyapunovFunction equilibrium_gap() {
  LyapunovFunction f;
  f.label = "equilibrium_gap";
  f.value = [](const Vector& x) {
    return (x.array() - (1.0 + x.array()).log()).sum();
  };
  f.gradient = [](const Vector& x) -> Vector {
    return x.array() / (1.0 + x.array());
  };
  f.hessian_diag = [](const Vector& x) -> Vector {
    return 1.0 / (1.0 + x.array()).square();
  };
  return f;
}

LyapunovFunction log_species(int i, int n) {
  if (i < 0 || i >= n) throw DimensionMismatch("species index out of range");
  LyapunovFunction f;
  std::ostringstream label;
  label << "log_species(" << i << ")";
  f.label = label.str();
  f.value = [i](const Vector& x) { return std::log(x[i]); };
  f.gradient = [i, n](const Vector& x) -> Vector {
    Vector g = Vector::Zero(n);
    g[i] = 1.0 / x[i];
    return g;
  };
  f.hessian_diag = [i, n](const Vector& x) -> Vector {
    Vector h = Vector::Zero(n);
    h[i] = -1.0 / (x[i] * x[i]);
    return h;
  };
  return f;
}

LyapunovFunction reciprocal_power(double theta) {
  if (!(theta > 0.0)) throw DimensionMismatch("exponent must be positive");
  LyapunovFunction f;
  std::ostringstream label;
  label << "reciprocal_power(theta=" << theta << ")";
  f.label = label.str();
  // With S = sum_i x_i and U = 1 + 1/S:
  //   dV/dx_i   = -theta U^{theta-1} / S^2
  //   d2V/dx_i2 = theta (theta-1) U^{theta-2} / S^4
  //             + 2 theta U^{theta-1} / S^3
  f.value = [theta](const Vector& x) {
    const double s = x.sum();
    return std::pow(1.0 + 1.0 / s, theta);
  };
  f.gradient = [theta](const Vector& x) -> Vector {
    const double s = x.sum();
    const double u = 1.0 + 1.0 / s;
    const double g = -theta * std::pow(u, theta - 1.0) / (s * s);
    return Vector::Constant(x.size(), g);
  };
  f.hessian_diag = [theta](const Vector& x) -> Vector {
    const double s = x.sum();
    const double u = 1.0 + 1.0 / s;
    const double h = theta * (theta - 1.0) * std::pow(u, theta - 2.0) /
                         (s * s * s * s) +
                     2.0 * theta * std::pow(u, theta - 1.0) / (s * s * s);
    return Vector::Constant(x.size(), h);
  };
  return f;
}

std::vector<LyapunovFunction> library(int n) {
  std::vector<LyapunovFunction> fs;
  fs.push_back(power_sum(0.5));
  fs.push_back(power_sum(1.0));
  fs.push_back(power_sum(2.0));
  fs.push_back(barrier(0.5));
  fs.push_back(equilibrium_gap());
  for (int i = 0; i < n; ++i) fs.push_back(log_species(i, n));
  fs.push_back(reciprocal_power(2.0));
  return fs;
}

}  // namespace lyapunov

double generator_apply(const LyapunovFunction& v,
                       const Eigen::Ref<const Vector>& x, int alpha,
                       const dynamics::CoefficientTable& coeffs) {
  const Vector xv = x;
  const Vector grad = v.gradient(xv);
  const Vector hess = v.hessian_diag(xv);
  const Vector xi = dynamics::drift(xv, alpha, coeffs);
  const Vector s = dynamics::diffusion_diag(xv, alpha, coeffs);
  return grad.dot(xi) + 0.5 * hess.dot(s.array().square().matrix());
}

PerturbationTerms perturbation_terms(const LyapunovFunction& v,
                                     const Eigen::Ref<const Vector>& x,
                                     int alpha,
                                     const chain::TwoTimeScaleChain& two_scale,
                                     const chain::StationaryDistribution& nu,
                                     const dynamics::CoefficientTable& coeffs,
                                     double quad_horizon) {
  const chain::GeneratorSpec q = two_scale.composed();
  const int n_states = q.size();
  if (alpha < 0 || alpha >= n_states) {
    throw MissingState("evaluation state outside the retained window");
  }
  if (nu.nu.size() != n_states) {
    throw DimensionMismatch("stationary vector does not match the window");
  }
  if (coeffs.n_states() < n_states) {
    throw MissingState("window has states beyond the coefficient table");
  }
  if (!(quad_horizon > 0.0)) {
    throw DimensionMismatch("quadrature horizon must be positive");
  }

  const Vector xv = x;
  const Vector grad = v.gradient(xv);
  const Vector hess = v.hessian_diag(xv);

  Vector g1(n_states), g2(n_states);
  for (int k = 0; k < n_states; ++k) {
    const Vector xi = dynamics::drift(xv, k, coeffs);
    const Vector s = dynamics::diffusion_diag(xv, k, coeffs);
    g1[k] = grad.dot(xi);
    g2[k] = 0.5 * hess.dot(s.array().square().matrix());
  }
  const double mean1 = nu.nu.dot(g1);
  const double mean2 = nu.nu.dot(g2);
  // Centered couplings keep the integrand exactly zero when the tables do
  // not depend on the regime, regardless of semigroup row-sum roundoff.
  Vector c1 = g1.array() - mean1;
  Vector c2 = g2.array() - mean2;
  if (g1.maxCoeff() == g1.minCoeff()) c1.setZero();
  if (g2.maxCoeff() == g2.minCoeff()) c2.setZero();

  // Quadrature step resolves both the fast semigroup and the e^{-u} factor.
  const double target = std::min(0.01 * two_scale.epsilon, 0.05);
  int m = static_cast<int>(std::ceil(quad_horizon / target));
  if (m % 2 != 0) ++m;
  const double h = quad_horizon / m;

  const Matrix p_step = chain::transition_matrix(q, h);
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n_states);
  row[alpha] = 1.0;

  const double g_scale =
      std::max({1.0, g1.cwiseAbs().maxCoeff(), g2.cwiseAbs().maxCoeff()});

  auto f1 = [&](const Eigen::RowVectorXd& r) { return r.dot(c1); };
  auto f2 = [&](const Eigen::RowVectorXd& r) { return r.dot(c2); };

  double acc1 = 0.0, acc2 = 0.0;
  double fa1 = f1(row), fa2 = f2(row);  // value at the left node, u = 0
  for (int j = 0; j < m; j += 2) {
    row *= p_step;
    const double um = (j + 1) * h;
    const double fm1 = std::exp(-um) * f1(row);
    const double fm2 = std::exp(-um) * f2(row);
    row *= p_step;
    const double ub = (j + 2) * h;
    const double fb1 = std::exp(-ub) * f1(row);
    const double fb2 = std::exp(-ub) * f2(row);
    acc1 += h / 3.0 * (fa1 + 4.0 * fm1 + fb1);
    acc2 += h / 3.0 * (fa2 + 4.0 * fm2 + fb2);
    fa1 = fb1;
    fa2 = fb2;

    // Remaining tail is below e^{-u} * TV * g_scale; stop once negligible.
    const double tv = (row - nu.nu.transpose()).cwiseAbs().sum();
    if (std::exp(-ub) * std::min(tv, 2.0) * g_scale < 1e-18) break;
  }

  return {acc1, acc2};
}

ConditionReport check_competitiveness(
    const dynamics::CoefficientTable& coeffs) {
  ConditionReport rep;
  rep.condition_id = "competitive-structure";
  double margin = std::numeric_limits<double>::infinity();
  int witness = -1;
  bool ok = true;
  for (int k = 0; k < coeffs.n_states(); ++k) {
    const Matrix& a = coeffs.a[k];
    for (int i = 0; i < coeffs.n_species; ++i) {
      for (int j = 0; j < coeffs.n_species; ++j) {
        const double e = a(i, j);
        if (i == j) {
          if (e < margin) {
            margin = e;
            witness = k;
          }
          if (!(e > 0.0)) ok = false;
        } else if (e < 0.0) {
          ok = false;
          if (e < margin) {
            margin = e;
            witness = k;
          }
        }
      }
    }
  }
  rep.verdict = ok ? "holds" : "fails";
  rep.margin = margin;
  rep.witness_index = witness;
  rep.details = "min self-interaction across states; negative entries win";
  return rep;
}

ConditionReport check_mixing_window(const chain::GeneratorSpec& q,
                                    const std::vector<double>& t_grid) {
  ConditionReport rep;
  rep.condition_id = "mixing-window";
  try {
    const chain::ErgodicityFit fit = chain::ergodicity_diagnostic(q, t_grid);
    rep.verdict = "holds-on-window";
    rep.margin = fit.lambda0;
    std::ostringstream d;
    d << "decay rate " << fit.lambda0 << ", prefactor " << fit.prefactor
      << "; statement restricted to the retained window";
    rep.details = d.str();
  } catch (const FitFailure& e) {
    rep.verdict = "fails";
    rep.margin = -1.0;
    rep.details = e.what();
  }
  return rep;
}

ConditionReport check_moment_condition(
    const dynamics::CoefficientTable& coeffs, double p, double user_bound) {
  if (!(p > 0.0)) throw DimensionMismatch("moment order must be positive");
  ConditionReport rep;
  rep.condition_id = "moment-sup";
  double sup = 0.0;
  int witness = -1;
  for (int k = 0; k < coeffs.n_states(); ++k) {
    double row = 0.0;
    for (int i = 0; i < coeffs.n_species; ++i) {
      const double aii = coeffs.a[k](i, i);
      const double num = 1.0 + p * coeffs.b[k][i] +
                         0.5 * p * p * coeffs.sigma[k][i] *
                             coeffs.sigma[k][i];
      if (aii > 0.0) {
        row += num / aii;
      } else {
        row = std::numeric_limits<double>::infinity();
        break;
      }
    }
    if (row > sup) {
      sup = row;
      witness = k;
    }
  }
  rep.witness_index = witness;
  rep.margin = user_bound - sup;
  if (std::isinf(sup)) {
    rep.verdict = "fails";
  } else if (std::isinf(user_bound)) {
    rep.verdict = "holds-on-window";
  } else {
    rep.verdict = rep.margin > 0.0 ? "holds" : "fails";
  }
  std::ostringstream d;
  d << "sup over retained states = " << sup << " at p = " << p;
  rep.details = d.str();
  return rep;
}

ConditionReport check_stability_condition(
    const averaging::AveragedCoefficients& avg) {
  ConditionReport rep;
  rep.condition_id = "equilibrium-stability";
  const int n = static_cast<int>(avg.r_bar.size());
  double margin = std::numeric_limits<double>::infinity();
  int witness = -1;
  for (int i = 0; i < n; ++i) {
    const double aii = avg.a_bar(i, i);
    const double lhs = std::pow(avg.r_bar[i] - aii, 2) +
                       4.0 * aii * (avg.b_bar[i] +
                                    avg.sigma_bar[i] * avg.sigma_bar[i]);
    if (-lhs < margin) {
      margin = -lhs;
      witness = i;
    }
  }
  rep.margin = margin;
  rep.witness_index = witness;
  rep.verdict = margin > 0.0 ? "holds" : "fails";
  rep.details = "worst species of the discriminant bracket";
  return rep;
}

ConditionReport check_extinction_condition(
    const averaging::AveragedCoefficients& avg) {
  ConditionReport rep;
  rep.condition_id = "noise-dominated-decay";
  const int n = static_cast<int>(avg.r_bar.size());
  double c = std::numeric_limits<double>::infinity();
  int witness = -1;
  for (int i = 0; i < n; ++i) {
    const double ci =
        0.5 * avg.sigma_bar[i] * avg.sigma_bar[i] - avg.r_bar[i];
    if (ci < c) {
      c = ci;
      witness = i;
    }
  }
  rep.margin = c;
  rep.witness_index = witness;
  rep.verdict = c > 0.0 ? "holds" : "fails";
  std::ostringstream d;
  d << "uniform decay rate c = " << c;
  rep.details = d.str();
  return rep;
}

PermanenceCheck check_permanence_condition(
    const averaging::AveragedCoefficients& avg) {
  PermanenceCheck out;
  ConditionReport& rep = out.report;
  rep.condition_id = "persistent-floor";
  const double b_hat = avg.b_hat;
  const double s2 = avg.sigma_tilde * avg.sigma_tilde;
  rep.margin = b_hat;
  int witness = 0;
  avg.b_bar.minCoeff(&witness);
  rep.witness_index = witness;
  if (b_hat > 0.0) {
    rep.verdict = "holds";
    out.theta = s2 > 0.0 ? std::min(b_hat / s2, 1e6) : 1.0;
    out.kappa = out.theta * (2.0 * b_hat - out.theta * s2) / 4.0;
  } else {
    rep.verdict = "fails";
    out.theta = 0.0;
    out.kappa = 0.0;
  }
  std::ostringstream d;
  d << "min averaged growth rate = " << b_hat << ", theta = " << out.theta
    << ", kappa = " << out.kappa;
  rep.details = d.str();
  return out;
}

double sample_lyapunov_exponent(const dynamics::HybridTrajectory& traj,
                                int species, double burn_in) {
  if (species < 0 || species >= traj.x.cols()) {
    throw DimensionMismatch("species index out of range");
  }
  if (!(burn_in >= 0.0)) throw DimensionMismatch("negative burn-in");
  if (traj.clamped && traj.clamp_time >= burn_in) {
    throw DegenerateWindow("trajectory clamped inside the fit window");
  }
  const int n = traj.n_points();
  int start = 0;
  while (start < n && traj.times[start] < burn_in) ++start;
  const int m = n - start;
  if (m < 2) {
    throw DegenerateWindow("too few grid points after the burn-in");
  }
  const Vector ts = traj.times.tail(m);
  const Vector ys = traj.x.col(species).tail(m).array().log();
  return linear_fit(ts, ys).slope;
}

}  // namespace hybridlv::analysis
