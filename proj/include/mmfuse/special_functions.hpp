#pragma once

namespace mmfuse {

double normal_cdf(double x);

// Regularized incomplete beta I_x(a, b) by the modified Lentz continued
// fraction, switching to I_{1-x}(b, a) above the mean for fast convergence.
// Absolute error is below 1e-12 for the degrees of freedom used here.
double regularized_incomplete_beta(double a, double b, double x);

// CDF of the F distribution with (d1, d2) degrees of freedom.
double f_cdf(double x, double d1, double d2);

}  // namespace mmfuse
