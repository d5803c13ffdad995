#include "sami/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sami {

double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean of empty vector");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

namespace {

// Continued fraction for the incomplete beta (Lentz's algorithm).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
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
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete beta did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("incomplete beta needs x in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) +
                        b * std::log(1.0 - x) + a * std::log(x)) *
                   betacf(b, a, 1.0 - x) / b;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired t-test needs equal lengths");
  if (a.size() < 2) throw std::invalid_argument("paired t-test needs n >= 2");
  const auto n = static_cast<double>(a.size());
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double md = mean(d);
  const double sd = sample_std(d);
  if (sd == 0.0) {
    if (md == 0.0) return {0.0, 1.0};
    return {md > 0.0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity(),
            0.0};
  }
  const double t = md / (sd / std::sqrt(n));
  const double df = n - 1.0;
  const double p = incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  return {t, p};
}

Pca2d pca_2d(const std::vector<double>& rows, std::size_t n, std::size_t d) {
  if (rows.size() != n * d) throw std::invalid_argument("pca input size mismatch");
  if (n == 0 || d == 0) throw std::invalid_argument("pca needs data");

  Pca2d out;
  out.center.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.center[j] += rows[i * d + j];
  for (double& c : out.center) c /= static_cast<double>(n);

  // Covariance, n-1 normalization (0 for a single row).
  std::vector<double> cov(d * d, 0.0);
  if (n > 1) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k)
          cov[j * d + k] += (rows[i * d + j] - out.center[j]) * (rows[i * d + k] - out.center[k]);
    for (double& c : cov) c /= static_cast<double>(n - 1);
  }

  // Cyclic Jacobi rotations on the symmetric covariance.
  std::vector<double> v(d * d, 0.0);
  for (std::size_t j = 0; j < d; ++j) v[j * d + j] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) off += cov[p * d + q] * cov[p * d + q];
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = cov[p * d + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (cov[q * d + q] - cov[p * d + p]) / (2.0 * apq);
        const double t =
            (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < d; ++k) {
          const double akp = cov[k * d + p], akq = cov[k * d + q];
          cov[k * d + p] = c * akp - s * akq;
          cov[k * d + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double apk = cov[p * d + k], aqk = cov[q * d + k];
          cov[p * d + k] = c * apk - s * aqk;
          cov[q * d + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double vkp = v[k * d + p], vkq = v[k * d + q];
          v[k * d + p] = c * vkp - s * vkq;
          v[k * d + q] = s * vkp + c * vkq;
        }
      }
  }

  std::vector<std::size_t> order(d);
  for (std::size_t j = 0; j < d; ++j) order[j] = j;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return cov[x * d + x] > cov[y * d + y]; });

  out.eigenvalues.resize(d);
  for (std::size_t j = 0; j < d; ++j) out.eigenvalues[j] = cov[order[j] * d + order[j]];

  const std::size_t ncomp = std::min<std::size_t>(2, d);
  out.components.assign(2 * d, 0.0);
  for (std::size_t r = 0; r < ncomp; ++r)
    for (std::size_t k = 0; k < d; ++k) out.components[r * d + k] = v[k * d + order[r]];

  out.projection.assign(n * 2, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < ncomp; ++r) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k)
        dot += (rows[i * d + k] - out.center[k]) * out.components[r * d + k];
      out.projection[i * 2 + r] = dot;
    }
  return out;
}

}  // namespace sami
