#pragma once

#include <vector>

namespace slick {

// Regularized incomplete beta I_x(a, b), evaluated with the Lentz continued
// fraction; absolute error target 1e-12 over the usable range.
double regularized_incomplete_beta(double a, double b, double x);

// Student-t CDF and two-sided tail probability with df degrees of freedom.
double student_t_cdf(double t, int df);
double student_t_two_sided_p(double t, int df);

struct OlsFit {
  std::vector<double> beta;
  double r_squared = 0.0;  // 1 when the response is constant (SS_tot = 0)
  std::vector<double> residuals;
};

// Ordinary least squares min ||X beta - y|| via Householder QR on the design
// matrix. Throws Error(RankDeficient) when X lacks full column rank.
OlsFit ols_fit(const std::vector<std::vector<double>>& design, const std::vector<double>& response);

}  // namespace slick
