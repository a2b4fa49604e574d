#pragma once

namespace spstack {

/// Modified Bessel function of the second kind K_nu(x) for real order nu >= 0
/// and x > 0. Half-integer orders take a closed-form path; otherwise a Temme
/// series (x <= 2), a Steed continued fraction (2 < x < 30) or the large-x
/// asymptotic expansion (x >= 30) is used. Relative accuracy is ~1e-13 for
/// nu in [0, 5] and x in [1e-6, 700].
///
/// Throws std::invalid_argument for x <= 0 or nu < 0 and std::range_error
/// when the result overflows a double (x tiny, nu large).
double bessel_k(double nu, double x);

namespace detail {

/// Series / continued-fraction / asymptotic path without the half-integer
/// shortcut; exposed so the shortcut can be validated against it.
double bessel_k_general(double nu, double x);

/// sqrt(pi/(2x)) e^{-x} polynomial forms for nu = m + 1/2.
double bessel_k_half_integer(int m, double x);

}  // namespace detail

}  // namespace spstack
