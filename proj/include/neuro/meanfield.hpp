#pragma once

// Self-consistent mean-field equations of the stochastic Hopfield network.

#include <cstddef>
#include <span>
#include <vector>

namespace neuro::meanfield {

/// Largest nonnegative root of m = tanh(beta m). Zero for beta <= 1, one for
/// beta = +infinity.
double solve_m1(double beta);

struct MeanFieldSolution {
    double m1 = 0.0;
    double q = 0.0;
    double sigma_z = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    double residual = 0.0;  ///< max |residual| of the m1 and q equations
};

struct CoupledOptions {
    double damping = 0.5;
    double tolerance = 1e-10;
    std::size_t max_iterations = 100000;
};

/// The Gaussian averages that enter the coupled equations, for
/// z ~ N(0, sigma^2):
///   m = E[tanh(beta (m1 + z))],  q = E[tanh^2(beta (m1 + z))],
///   c = beta (1 - q) = beta E[sech^2(beta (m1 + z))].
struct GaussianAverages {
    double m;
    double q;
    double c;
};

/// Evaluated in the variable u = beta (m1 + z), which keeps the integrands
/// resolved for any beta.
GaussianAverages gaussian_averages(double m1, double sigma, double beta);

/// Same averages by plain Gauss-Hermite quadrature; accurate only while
/// beta * sigma is moderate. Used as an independent check.
GaussianAverages gaussian_averages_hermite(double m1, double sigma, double beta, int order = 60);

/// sigma_z^2 = alpha q / [1 - beta (1 - q)]^2
double sigma_z(double alpha, double q, double c);

/// Damped fixed-point iteration on (m1, q) from m1 = 1, q = 1. Falls back to
/// the m1 = 0 branch if the retrieval solution does not survive.
MeanFieldSolution solve_coupled(double alpha, double beta, const CoupledOptions& options = {});

struct DeterministicSolution {
    double m1;
    double p_error;  ///< steady-state error probability 1/2 [1 - erf(y)]
    double y;        ///< m1 / sqrt(2 sigma_z^2), zero below retrieval
};

/// Deterministic limit via y (sqrt(2 alpha) + (2/sqrt(pi)) e^{-y^2}) = erf(y);
/// reports the largest root, i.e. the retrieval branch.
DeterministicSolution solve_deterministic(double alpha);

/// Storage capacity at which the positive root of the y-equation disappears.
double critical_capacity();

enum class Retrieval { ordered, disordered };

struct PhasePoint {
    double alpha;     ///< critical capacity at this noise level
    double beta_inv;  ///< noise level 1 / beta
    Retrieval retrieval;  ///< phase just below alpha (ordered unless alpha = 0)
};

/// Critical alpha, for each noise level, at which solve_coupled loses its
/// m1 > 0 solution. Grid values must lie in (0, 1].
std::vector<PhasePoint> phase_boundary_scan(std::span<const double> beta_inv_grid);

/// Critical alpha at one noise level, by bisection to `tolerance`.
double critical_alpha(double beta, double tolerance = 1e-6);

/// Symmetric three-pattern mixed state (m, m, m, 0, ...):
/// m = 1/4 [tanh(3 beta m) + tanh(beta m)]. Largest nonnegative root; a
/// nonzero root exists iff beta > 1.
double solve_mixed_symmetric(double beta);

}  // namespace neuro::meanfield
