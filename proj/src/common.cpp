#include "hybridlv/common.hpp"

#include <cmath>

namespace hybridlv {

LinearFit linear_fit(const Eigen::Ref<const Vector>& x,
                     const Eigen::Ref<const Vector>& y) {
  if (x.size() != y.size()) {
    throw DimensionMismatch("fit abscissae and ordinates differ in length");
  }
  const int n = static_cast<int>(x.size());
  if (n < 2) throw DegenerateWindow("fit needs at least two points");

  const double xm = x.mean();
  const double ym = y.mean();
  const double sxx = (x.array() - xm).square().sum();
  if (!(sxx > 0.0)) {
    throw DegenerateWindow("fit abscissae are all identical");
  }
  const double sxy = ((x.array() - xm) * (y.array() - ym)).sum();
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = ym - f.slope * xm;
  return f;
}

}  // namespace hybridlv
