#include "spstack/bessel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace spstack {
namespace {

constexpr double kPi = 3.141592653589793238462643383279503;
constexpr double kEps = 1e-16;
constexpr int kMaxIter = 200;
constexpr double kLogDblMax = 709.0;

// Odd Taylor coefficients of 1/Gamma(1+t) at t = 0, used for
// (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu) when mu is close to zero.
constexpr double kA1 = 0.5772156649015328606065;
constexpr double kA3 = -0.042002635034095235529;
constexpr double kA5 = -0.04219773455554433675;
constexpr double kA7 = 0.0072189432466630995424;
constexpr double kA9 = -0.00021524167411495097282;

double gamma_one(double mu) {
    if (std::fabs(mu) <= 0.1) {
        const double m2 = mu * mu;
        return -(kA1 + m2 * (kA3 + m2 * (kA5 + m2 * (kA7 + m2 * kA9))));
    }
    return (1.0 / std::tgamma(1.0 - mu) - 1.0 / std::tgamma(1.0 + mu)) / (2.0 * mu);
}

// Temme's series for K_mu(x), K_{mu+1}(x), |mu| <= 1/2, x <= 2.
void k_temme_series(double mu, double x, double& k_mu, double& k_mu1) {
    const double x2 = 0.5 * x;
    const double mu2 = mu * mu;
    const double pimu = kPi * mu;
    const double fact = (std::fabs(pimu) < 1e-30) ? 1.0 : pimu / std::sin(pimu);
    const double d = -std::log(x2);
    const double e = mu * d;
    const double fact2 = (std::fabs(e) < 1e-30) ? 1.0 : std::sinh(e) / e;
    const double gampl = 1.0 / std::tgamma(1.0 + mu);
    const double gammi = 1.0 / std::tgamma(1.0 - mu);
    const double gam1 = gamma_one(mu);
    const double gam2 = 0.5 * (gammi + gampl);

    double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
    double sum = ff;
    const double ee = std::exp(e);
    double p = 0.5 * ee / gampl;
    double q = 0.5 / (ee * gammi);
    double c = 1.0;
    const double dd = x2 * x2;
    double sum1 = p;
    int i = 1;
    for (; i <= kMaxIter; ++i) {
        ff = (i * ff + p + q) / (i * i - mu2);
        c *= dd / i;
        p /= (i - mu);
        q /= (i + mu);
        const double del = c * ff;
        sum += del;
        sum1 += c * (p - i * ff);
        if (std::fabs(del) < std::fabs(sum) * kEps) break;
    }
    if (i > kMaxIter) throw std::runtime_error("bessel_k: series failed to converge");
    k_mu = sum;
    k_mu1 = sum1 * (2.0 / x);
}

// Steed/Thompson-Barnett continued fraction CF2, |mu| <= 1/2, x > 2.
void k_continued_fraction(double mu, double x, double& k_mu, double& k_mu1) {
    const double mu2 = mu * mu;
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d, delh = d;
    double q1 = 0.0, q2 = 1.0;
    const double a1 = 0.25 - mu2;
    double q = a1, c = a1, a = -a1;
    double s = 1.0 + q * delh;
    int i = 2;
    for (; i <= kMaxIter; ++i) {
        a -= 2 * (i - 1);
        c = -a * c / i;
        const double qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const double dels = q * delh;
        s += dels;
        if (std::fabs(dels / s) < kEps) break;
    }
    if (i > kMaxIter) throw std::runtime_error("bessel_k: continued fraction failed to converge");
    h = a1 * h;
    k_mu = std::sqrt(kPi / (2.0 * x)) * std::exp(-x) / s;
    k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
}

// Large-x expansion K_nu(x) = sqrt(pi/(2x)) e^{-x} sum_k a_k(nu)/(8x)^k.
double k_asymptotic(double nu, double x) {
    const double mu4 = 4.0 * nu * nu;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k <= 40; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= (mu4 - odd * odd) / (8.0 * k * x);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * kEps) break;
    }
    return std::sqrt(kPi / (2.0 * x)) * std::exp(-x) * sum;
}

}  // namespace

namespace detail {

double bessel_k_half_integer(int m, double x) {
    // K_{1/2}(x) = sqrt(pi/(2x)) e^{-x}; raise the order by the three-term
    // recurrence K_{v+1} = K_{v-1} + (2v/x) K_v.
    const double base = std::sqrt(kPi / (2.0 * x)) * std::exp(-x);
    if (m == 0) return base;
    double km1 = base;             // K_{-1/2} = K_{1/2}
    double k = base;               // K_{1/2}
    for (int j = 0; j < m; ++j) {  // produces K_{j + 3/2}
        const double kp1 = km1 + ((2.0 * j + 1.0) / x) * k;
        km1 = k;
        k = kp1;
    }
    return k;
}

double bessel_k_general(double nu, double x) {
    const int nl = static_cast<int>(nu + 0.5);
    const double mu = nu - nl;  // |mu| <= 1/2
    double k_mu, k_mu1;
    if (x >= 30.0) {
        // Both orders straight from the expansion; no recurrence needed.
        if (nl == 0) return k_asymptotic(nu, x);
        k_mu = k_asymptotic(mu, x);
        k_mu1 = k_asymptotic(mu + 1.0, x);
    } else if (x > 2.0) {
        k_continued_fraction(mu, x, k_mu, k_mu1);
    } else {
        k_temme_series(mu, x, k_mu, k_mu1);
    }
    for (int i = 1; i <= nl; ++i) {
        const double knext = k_mu + (2.0 * (mu + i) / x) * k_mu1;
        k_mu = k_mu1;
        k_mu1 = knext;
    }
    return k_mu;
}

}  // namespace detail

double bessel_k(double nu, double x) {
    if (!(x > 0.0) || !std::isfinite(x))
        throw std::invalid_argument("bessel_k: x must be positive and finite");
    if (!(nu >= 0.0) || !std::isfinite(nu))
        throw std::invalid_argument("bessel_k: nu must be non-negative and finite");

    // Leading small-x behaviour K_nu ~ Gamma(nu) 2^{nu-1} x^{-nu}; refuse
    // arguments whose result cannot be represented.
    if (nu > 0.0 && x < 2.0) {
        const double log_lead =
            std::lgamma(nu) + (nu - 1.0) * 0.6931471805599453 - nu * std::log(x);
        if (log_lead > kLogDblMax) throw std::range_error("bessel_k: result overflows");
    }

    double result;
    const double half = nu - 0.5;
    const double m_round = std::round(half);
    if (m_round >= 0.0 && std::fabs(half - m_round) < 1e-12)
        result = detail::bessel_k_half_integer(static_cast<int>(m_round), x);
    else
        result = detail::bessel_k_general(nu, x);
    if (!std::isfinite(result)) throw std::range_error("bessel_k: result overflows");
    return result;
}

}  // namespace spstack
