#include "slick/stats.hpp"

#include <cmath>
#include <limits>

#include "slick/errors.hpp"

namespace slick {

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double incbeta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-30;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw Error(errkind::InvalidRequest, "incomplete beta requires a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  // Use the continued fraction on the side where it converges fast.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * incbeta_cf(a, b, x) / a;
  return 1.0 - front * incbeta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, int df) {
  if (df < 1) throw Error(errkind::InvalidRequest, "degrees of freedom must be >= 1");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double v = static_cast<double>(df);
  const double x = v / (v + t * t);
  const double tail = 0.5 * regularized_incomplete_beta(v / 2.0, 0.5, x);
  return t >= 0.0 ? 1.0 - tail : tail;
}

double student_t_two_sided_p(double t, int df) {
  if (df < 1) throw Error(errkind::InvalidRequest, "degrees of freedom must be >= 1");
  if (t == 0.0) return 1.0;
  if (std::isinf(t)) return 0.0;
  const double v = static_cast<double>(df);
  return regularized_incomplete_beta(v / 2.0, 0.5, v / (v + t * t));
}

OlsFit ols_fit(const std::vector<std::vector<double>>& design, const std::vector<double>& response) {
  const std::size_t n = design.size();
  if (n == 0 || n != response.size())
    throw Error(errkind::InvalidRequest, "design and response sizes disagree");
  const std::size_t p = design.front().size();
  if (p == 0 || n < p)
    throw Error(errkind::InvalidRequest, "need at least as many points as coefficients");
  for (const auto& row : design)
    if (row.size() != p) throw Error(errkind::InvalidRequest, "ragged design matrix");

  // Householder QR of [X | y], reducing X to upper-triangular R in place.
  std::vector<std::vector<double>> a = design;
  std::vector<double> y = response;
  double col_scale = 0.0;
  for (const auto& row : a)
    for (double v : row) col_scale = std::max(col_scale, std::abs(v));

  for (std::size_t k = 0; k < p; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < n; ++i) norm += a[i][k] * a[i][k];
    norm = std::sqrt(norm);
    if (norm <= 1e-12 * std::max(1.0, col_scale))
      throw Error(errkind::RankDeficient, "design matrix column " + std::to_string(k) +
                                              " is linearly dependent on the others");
    if (a[k][k] > 0) norm = -norm;
    std::vector<double> v(n - k);
    v[0] = a[k][k] - norm;
    for (std::size_t i = k + 1; i < n; ++i) v[i - k] = a[i][k];
    double vtv = 0.0;
    for (double w : v) vtv += w * w;
    if (vtv <= 0.0)
      throw Error(errkind::RankDeficient, "degenerate column " + std::to_string(k));

    for (std::size_t j = k; j < p; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < n; ++i) dot += v[i - k] * a[i][j];
      const double f = 2.0 * dot / vtv;
      for (std::size_t i = k; i < n; ++i) a[i][j] -= f * v[i - k];
    }
    double dot = 0.0;
    for (std::size_t i = k; i < n; ++i) dot += v[i - k] * y[i];
    const double f = 2.0 * dot / vtv;
    for (std::size_t i = k; i < n; ++i) y[i] -= f * v[i - k];
  }

  OlsFit fit;
  fit.beta.assign(p, 0.0);
  for (std::size_t k = p; k-- > 0;) {
    double s = y[k];
    for (std::size_t j = k + 1; j < p; ++j) s -= a[k][j] * fit.beta[j];
    const double diag = a[k][k];
    if (std::abs(diag) <= 1e-12 * std::max(1.0, col_scale))
      throw Error(errkind::RankDeficient, "rank-deficient triangular factor");
    fit.beta[k] = s / diag;
  }

  fit.residuals.assign(n, 0.0);
  double ss_res = 0.0;
  double mean_y = 0.0;
  for (double v : response) mean_y += v;
  mean_y /= static_cast<double>(n);
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = 0.0;
    for (std::size_t j = 0; j < p; ++j) pred += design[i][j] * fit.beta[j];
    fit.residuals[i] = response[i] - pred;
    ss_res += fit.residuals[i] * fit.residuals[i];
    ss_tot += (response[i] - mean_y) * (response[i] - mean_y);
  }
  // Constant response: the model explains it trivially.
  fit.r_squared = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
  return fit;
}

}  // namespace slick
