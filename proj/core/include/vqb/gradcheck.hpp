#pragma once

#include <functional>

#include "vqb/matrix.hpp"

namespace vqb {

// Central-difference gradient estimate (f(x+eps*e_i) - f(x-eps*e_i)) / 2eps,
// entry by entry. This is the independent oracle every hand-written backward
// pass in the project is tested against. Throws numeric_error if f evaluates
// to a non-finite value.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f,
                        const Matrix& x, double eps);

// max|a - b| / (max|b| + floor). Convention used by all gradient checks:
// b is the finite-difference reference.
double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-9);

}  // namespace vqb
