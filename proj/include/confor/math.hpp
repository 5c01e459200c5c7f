#ifndef CONFOR_MATH_HPP
#define CONFOR_MATH_HPP

namespace confor {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

double normal_pdf(double z);
double normal_cdf(double z);

// Inverse standard normal CDF, u in (0,1). Accurate to full double precision
// (Wichura's PPND16 rational approximations).
double normal_quantile(double u);

// Regularized incomplete beta I_x(a, b), x in [0,1].
double regularized_incomplete_beta(double a, double b, double x);

double student_t_pdf(double t, double dof);
double student_t_cdf(double t, double dof);
double student_t_quantile(double u, double dof);

}  // namespace confor

#endif
