#include "optomech/polynomial.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace optomech {

namespace {

std::vector<double> strip_leading(std::span<const double> coeffs) {
  std::size_t first = 0;
  while (first < coeffs.size() && coeffs[first] == 0.0) ++first;
  return {coeffs.begin() + static_cast<std::ptrdiff_t>(first), coeffs.end()};
}

std::vector<double> derivative(const std::vector<double>& c) {
  std::vector<double> d;
  const std::size_t n = c.size() - 1;
  for (std::size_t k = 0; k < n; ++k) d.push_back(c[k] * static_cast<double>(n - k));
  return d;
}

}  // namespace

double polyval(std::span<const double> coeffs, double x) {
  double acc = 0.0;
  for (double c : coeffs) acc = acc * x + c;
  return acc;
}

std::complex<double> polyval(std::span<const double> coeffs, std::complex<double> x) {
  std::complex<double> acc = 0.0;
  for (double c : coeffs) acc = acc * x + c;
  return acc;
}

std::vector<std::complex<double>> polynomial_roots(std::span<const double> coeffs) {
  const std::vector<double> c = strip_leading(coeffs);
  if (c.size() < 2) return {};
  const int n = static_cast<int>(c.size()) - 1;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) companion(0, k) = -c[static_cast<std::size_t>(k + 1)] / c[0];
  for (int k = 1; k < n; ++k) companion(k, k - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  const Eigen::VectorXcd ev = es.eigenvalues();

  const std::vector<double> dc = derivative(c);
  std::vector<std::complex<double>> roots;
  roots.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    std::complex<double> z = ev(k);
    for (int it = 0; it < 8; ++it) {
      const std::complex<double> f = polyval(c, z);
      const std::complex<double> df = polyval(dc, z);
      if (std::abs(df) == 0.0) break;
      const std::complex<double> step = f / df;
      const std::complex<double> next = z - step;
      // Newton must not make things worse (guards near-multiple roots).
      if (std::abs(polyval(c, next)) > std::abs(f)) break;
      z = next;
      if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(z))) break;
    }
    roots.push_back(z);
  }
  return roots;
}

std::vector<double> real_polynomial_roots(std::span<const double> coeffs, double imag_tol) {
  std::vector<double> out;
  for (const auto& z : polynomial_roots(coeffs)) {
    if (std::abs(z.imag()) < imag_tol * std::max(1.0, std::abs(z))) out.push_back(z.real());
  }
  std::sort(out.begin(), out.end());
  return out;
}

double cubic_discriminant(double a, double b, double c, double d) {
  return 18.0 * a * b * c * d - 4.0 * b * b * b * d + b * b * c * c - 4.0 * a * c * c * c - 27.0 * a * a * d * d;
}

}  // namespace optomech
