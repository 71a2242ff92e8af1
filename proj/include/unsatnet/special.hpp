#pragma once

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/beta.hpp>

#include "unsatnet/error.hpp"

namespace unsatnet {

/// Two-sided tail probability P(|T| >= |t|) for Student's t with `dof` degrees
/// of freedom, via the regularized incomplete beta I_x(dof/2, 1/2).
inline double student_t_two_sided(double t, double dof) {
  if (!(dof > 0)) throw DomainError("student_t_two_sided: dof must be > 0");
  if (std::isinf(t)) return 0.0;
  const double x = dof / (dof + t * t);
  return std::clamp(boost::math::ibeta(0.5 * dof, 0.5, x), 0.0, 1.0);
}

}  // namespace unsatnet
