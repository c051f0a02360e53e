#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace hybridlv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexVector = Eigen::VectorXi;

// Common base so callers can catch all library errors at once.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Truncation window loses more outgoing rate than the configured tolerance.
struct TailMassExceeded : Error { using Error::Error; };
// A transition rate is negative (or otherwise not a rate).
struct NegativeRate : Error { using Error::Error; };
// The retained window is not a single strongly connected class.
struct NotIrreducible : Error { using Error::Error; };
// A linear solve or eigen decomposition did not meet its residual tolerance.
struct SolverFailure : Error { using Error::Error; };
// Mixed operand sizes (species counts, window sizes, grid lengths).
struct DimensionMismatch : Error { using Error::Error; };
// Dense window operation requested beyond the supported window cap.
struct WindowTooLarge : Error { using Error::Error; };
// Initial population is not strictly positive and finite.
struct InvalidInitial : Error { using Error::Error; };
// Coefficient table has no entry for a retained regime state.
struct MissingState : Error { using Error::Error; };
// Requested fit/statistics window leaves too few usable points.
struct DegenerateWindow : Error { using Error::Error; };
// Regression produced no usable decay/growth rate.
struct FitFailure : Error { using Error::Error; };
// Input file violates the documented schema.
struct SchemaError : Error { using Error::Error; };
// Interaction matrix violates a_ii > 0, a_ij >= 0 in some regime state.
struct CompetitivenessViolation : Error { using Error::Error; };

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// Ordinary least squares of y against x. Throws DegenerateWindow when fewer
// than two distinct abscissae remain.
LinearFit linear_fit(const Eigen::Ref<const Vector>& x,
                     const Eigen::Ref<const Vector>& y);

}  // namespace hybridlv
