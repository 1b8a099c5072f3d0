// Independent reference computations used as test oracles. Everything here is
// deliberately written from first principles (series with Euler-Maclaurin
// tails, adaptive quadrature, finite differences, Monte Carlo) so it shares no
// code path with the library implementations it checks.
#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracles {

inline constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

// Digamma via the convergent series psi(x) = -gamma + sum_k (1/(k+1) - 1/(k+x))
// truncated at M terms with an Euler-Maclaurin tail correction.
inline double digamma_series(double x) {
    constexpr std::size_t M = 1000000;
    double sum = 0.0;
    for (std::size_t k = M; k-- > 0;) {  // ascending magnitudes: sum small terms first
        const double kk = static_cast<double>(k);
        sum += 1.0 / (kk + 1.0) - 1.0 / (kk + x);
    }
    // Tail: integral + g/2 - g'/12 for g(k) = 1/(k+1) - 1/(k+x) from k = M on.
    const double m = static_cast<double>(M);
    const double integral = std::log((m + x) / (m + 1.0));
    const double g_m = 1.0 / (m + 1.0) - 1.0 / (m + x);
    const double gp_m = -1.0 / ((m + 1.0) * (m + 1.0)) + 1.0 / ((m + x) * (m + x));
    return -kEulerGamma + sum + integral + g_m / 2.0 - gp_m / 12.0;
}

// Recursive adaptive Simpson quadrature.
inline double adaptive_simpson_(const std::function<double(double)>& f, double a, double b,
                                double fa, double fm, double fb, double whole, double tol,
                                int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson_(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1) +
           adaptive_simpson_(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol, int depth = 48) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_(f, a, b, fa, fm, fb, whole, tol, depth);
}

// E[log beta] under Gamma(nu, lambda) by quadrature in y = log beta:
//   integrand(y) = y * lambda^nu / Gamma(nu) * exp(nu*y - lambda*e^y).
// The bracket around the mode y* = log(nu/lambda) is integrated panel by
// panel so the adaptive rule cannot step over the concentrated mass.
inline double expected_log_beta_quadrature(double nu, double lambda) {
    const double log_norm = nu * std::log(lambda) - std::lgamma(nu);
    auto integrand = [&](double y) {
        const double log_pdf = log_norm + nu * y - lambda * std::exp(y);
        return log_pdf < -745.0 ? 0.0 : y * std::exp(log_pdf);
    };
    const double mode = std::log(nu / lambda);
    const double lo = mode - std::max(130.0 / nu, 30.0);
    const double hi = mode + 25.0;
    constexpr int panels = 128;
    const double h = (hi - lo) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p)
        total += adaptive_simpson(integrand, lo + p * h, lo + (p + 1) * h, 1e-13);
    return total;
}

// Central finite difference of a scalar function of one coordinate.
inline double central_diff(const std::function<double(double)>& f, double x0, double step) {
    return (f(x0 + step) - f(x0 - step)) / (2.0 * step);
}

// Relative error with a floor on the denominator.
inline double rel_err(double got, double want, double floor_ = 1e-6) {
    return std::abs(got - want) / std::max({std::abs(got), std::abs(want), floor_});
}

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

// Mean and standard error of f over `samples` draws.
inline MonteCarloEstimate monte_carlo(std::size_t samples, std::mt19937_64& rng,
                                      const std::function<double(std::mt19937_64&)>& f) {
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const double v = f(rng);
        sum += v;
        sum_sq += v * v;
    }
    const double n = static_cast<double>(samples);
    MonteCarloEstimate est;
    est.mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - est.mean * est.mean);
    est.std_error = std::sqrt(var / n);
    return est;
}

}  // namespace oracles
