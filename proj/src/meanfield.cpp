#include "neuro/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "neuro/numerics.hpp"

namespace neuro::meanfield {

namespace {

// Root of f on (0, 1] for maps whose slope at the origin exceeds one, so that
// f(m) = m - rhs(m) is negative just above zero and positive at one.
template <typename F>
double positive_root(F f) {
    const double lo = std::numeric_limits<double>::min();
    return bisect(f, lo, 1.0, 1e-16);
}

double sech2(double u) {
    const double c = std::cosh(u);
    return std::isinf(c) ? 0.0 : 1.0 / (c * c);
}

// P(N(0,1) < x)
double normal_cdf(double x) { return 0.5 * neuro::erfc(-x / std::numbers::sqrt2); }

constexpr double kUMax = 40.0;  // sech^2(40) < 1e-34

}  // namespace

double solve_m1(double beta) {
    if (!(beta >= 0.0)) throw Error("solve_m1: beta must be non-negative");
    if (std::isinf(beta)) return 1.0;
    if (beta <= 1.0) return 0.0;
    return positive_root([beta](double m) { return m - std::tanh(beta * m); });
}

double solve_mixed_symmetric(double beta) {
    if (!(beta >= 0.0)) throw Error("solve_mixed_symmetric: beta must be non-negative");
    if (std::isinf(beta)) return 0.5;
    if (beta <= 1.0) return 0.0;
    return positive_root(
        [beta](double m) { return m - 0.25 * (std::tanh(3.0 * beta * m) + std::tanh(beta * m)); });
}

// ---------------------------------------------------------------------------

GaussianAverages gaussian_averages(double m1, double sigma, double beta) {
    if (!(beta > 0.0) || !(sigma >= 0.0)) throw Error("gaussian_averages: need beta > 0, sigma >= 0");
    if (sigma == 0.0) {
        const double t = std::tanh(beta * m1);
        return {t, t * t, beta * sech2(beta * m1)};
    }
    // U = beta (m1 + z) ~ N(u0, s^2).  By parts,
    //   E[tanh U] = 1 - int sech^2(u) P(U < u) du,   E[sech^2 U] = int sech^2(u) p_U(u) du.
    const double u0 = beta * m1;
    const double s = beta * sigma;

    std::vector<double> cuts = {-kUMax, -20, -10, -6, -4, -2, -1, 0, 1, 2, 4, 6, 10, 20, kUMax};
    for (double k : {0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0}) {
        for (double sign : {-1.0, 1.0}) {
            const double u = u0 + sign * k * s;
            if (u > -kUMax && u < kUMax) cuts.push_back(u);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const auto& rule = gauss_legendre_rule(20);
    const double inv_norm = 1.0 / (s * std::sqrt(2.0 * std::numbers::pi));
    double tail = 0.0, density = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double a = cuts[k], b = cuts[k + 1];
        const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        for (std::size_t n = 0; n < rule.nodes.size(); ++n) {
            const double u = mid + half * rule.nodes[n];
            const double w = half * rule.weights[n] * sech2(u);
            const double x = (u - u0) / s;
            tail += w * normal_cdf(x);
            density += w * inv_norm * std::exp(-0.5 * x * x);
        }
    }
    return {1.0 - tail, 1.0 - density, beta * density};
}

GaussianAverages gaussian_averages_hermite(double m1, double sigma, double beta, int order) {
    if (sigma == 0.0) return gaussian_averages(m1, 0.0, beta);
    const double m = gaussian_expectation([&](double z) { return std::tanh(beta * (m1 + z)); }, 0.0, sigma * sigma,
                                          order);
    const double e = gaussian_expectation([&](double z) { return sech2(beta * (m1 + z)); }, 0.0, sigma * sigma,
                                          order);
    return {m, 1.0 - e, beta * e};
}

double sigma_z(double alpha, double q, double c) {
    const double denom = std::max(1.0 - c, 1e-12);
    return std::sqrt(alpha * q) / denom;
}

MeanFieldSolution solve_coupled(double alpha, double beta, const CoupledOptions& options) {
    if (!(alpha > 0.0) || !(beta > 0.0)) throw Error("solve_coupled: need alpha > 0 and beta > 0");
    const double d = options.damping;

    auto iterate = [&](double m1, double q, double c, bool pin_m1) {
        MeanFieldSolution sol;
        for (std::size_t it = 1; it <= options.max_iterations; ++it) {
            const double sigma = sigma_z(alpha, q, c);
            const auto avg = gaussian_averages(m1, sigma, beta);
            const double rm = pin_m1 ? 0.0 : avg.m - m1;
            const double rq = avg.q - q;
            sol.iterations = it;
            sol.residual = std::max(std::abs(rm), std::abs(rq));
            if (sol.residual < options.tolerance) {
                sol.converged = true;
                break;
            }
            m1 = std::clamp(m1 + d * rm, 0.0, 1.0);
            q = std::clamp(q + d * rq, 0.0, 1.0);
            c = (1.0 - d) * c + d * avg.c;
        }
        sol.m1 = m1;
        sol.q = q;
        sol.sigma_z = sigma_z(alpha, q, c);
        return sol;
    };

    auto sol = iterate(1.0, 1.0, 0.0, false);
    if (sol.m1 < 1e-8) {
        // E[tanh(beta z)] = 0, so m1 = 0 is exact; settle q on that branch
        auto zero = iterate(0.0, sol.q, beta * (1.0 - sol.q), true);
        zero.iterations += sol.iterations;
        return zero;
    }
    return sol;
}

// ---------------------------------------------------------------------------

namespace {

// g(y) = erf(y)/y - (2/sqrt(pi)) e^{-y^2}; the y-equation reads g(y) = sqrt(2 alpha).
double y_curve(double y) { return neuro::erf(y) / y - 2.0 / std::sqrt(std::numbers::pi) * std::exp(-y * y); }

double y_curve_slope(double y) {
    const double e = 2.0 / std::sqrt(std::numbers::pi) * std::exp(-y * y);
    return e / y - neuro::erf(y) / (y * y) + 2.0 * y * e;
}

double y_peak() {
    static const double peak = bisect(y_curve_slope, 0.5, 3.0, 1e-15);
    return peak;
}

}  // namespace

DeterministicSolution solve_deterministic(double alpha) {
    if (!(alpha > 0.0)) throw Error("solve_deterministic: alpha must be positive");
    const double target = std::sqrt(2.0 * alpha);
    const double peak = y_peak();
    if (target > y_curve(peak)) return {0.0, 0.5, 0.0};
    // g decreases beyond the peak and g(y) < 1/y, so 2/target brackets the root
    const double y = bisect([target](double v) { return y_curve(v) - target; }, peak, 2.0 / target, 1e-15);
    return {neuro::erf(y), 0.5 * neuro::erfc(y), y};
}

double critical_capacity() {
    const double g = y_curve(y_peak());
    return 0.5 * g * g;
}

double critical_alpha(double beta, double tolerance) {
    if (!(beta > 0.0)) throw Error("critical_alpha: beta must be positive");
    if (beta <= 1.0) return 0.0;
    constexpr double kOrdered = 1e-3;
    auto ordered = [&](double alpha) { return solve_coupled(alpha, beta).m1 > kOrdered; };
    double lo = 0.0, hi = 0.2;
    while (hi - lo > tolerance) {
        const double mid = 0.5 * (lo + hi);
        (mid > 0.0 && ordered(mid) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<PhasePoint> phase_boundary_scan(std::span<const double> beta_inv_grid) {
    std::vector<PhasePoint> out;
    out.reserve(beta_inv_grid.size());
    for (double t : beta_inv_grid) {
        if (!(t > 0.0 && t <= 1.0)) throw Error("phase_boundary_scan: noise levels must lie in (0, 1]");
        const double a = critical_alpha(1.0 / t);
        out.push_back({a, t, a > 0.0 ? Retrieval::ordered : Retrieval::disordered});
    }
    return out;
}

}  // namespace neuro::meanfield
