#pragma once

#include <cstddef>
#include <vector>

namespace sami {

double mean(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);  // n-1 denominator; 0 when n < 2

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
};

// Two-sided paired t-test on a - b with n-1 degrees of freedom. Zero-variance
// differences degenerate to p = 1 (all-zero differences: no evidence) or
// p = 0 (constant nonzero shift: certainty).
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// Two-dimensional principal component projection via exact Jacobi
// eigendecomposition of the d x d covariance (n-1 normalization).
struct Pca2d {
  std::vector<double> center;       // (d)
  std::vector<double> components;   // (2, d) row major, top eigenvectors
  std::vector<double> eigenvalues;  // (d), descending
  std::vector<double> projection;   // (n, 2) row major
};

Pca2d pca_2d(const std::vector<double>& rows, std::size_t n, std::size_t d);

}  // namespace sami
