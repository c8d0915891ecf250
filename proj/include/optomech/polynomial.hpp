#pragma once

#include <complex>
#include <span>
#include <vector>

namespace optomech {

/// Evaluates sum c[k] x^(n-k) for coefficients in descending powers.
double polyval(std::span<const double> coeffs, double x);
std::complex<double> polyval(std::span<const double> coeffs, std::complex<double> x);

/// All complex roots via eigenvalues of the companion matrix, each polished
/// with a few Newton steps. Leading zero coefficients are stripped.
std::vector<std::complex<double>> polynomial_roots(std::span<const double> coeffs);

/// Real roots in ascending order: roots whose imaginary part is below
/// `imag_tol` (absolute, or relative to |root| when that is larger) after
/// polishing. Near-coincident real roots are kept separately.
std::vector<double> real_polynomial_roots(std::span<const double> coeffs, double imag_tol = 1e-9);

/// Discriminant of a x^3 + b x^2 + c x + d.
double cubic_discriminant(double a, double b, double c, double d);

}  // namespace optomech
