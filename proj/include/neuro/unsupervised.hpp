#pragma once

// Unsupervised Hebbian learning: the plain Hebbian rule, Oja's rule and its
// Sanger and M-unit generalisations, competitive learning and Kohonen's
// self-organising map with the 1-D density-law fit.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "neuro/numerics.hpp"

namespace neuro::unsupervised {

/// Draws one input pattern.
using Sampler = std::function<Vector(RandomStream&)>;

class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Uniform draws from the rows of a fixed data set.
Sampler sample_rows(const Matrix& data);
/// Zero-mean Gaussian with independent components of the given variances.
Sampler gaussian_sampler(std::span<const double> variances);

/// <xi xi^T> over the rows of `data`.
Matrix second_moment(const Matrix& data);

// ---------------------------------------------------------------------------
// Single linear unit

/// w + eta (w . xi) xi.
Vector hebb_unsupervised_step(std::span<const double> w, std::span<const double> xi, double eta);

/// eta y (xi - y w) with y = w . xi.
Vector oja_increment(std::span<const double> w, std::span<const double> xi, double eta);

struct OjaOptions {
    double eta = 1e-3;
    std::size_t steps = 100000;
    double divergence_norm = 10.0;
};

/// Oja's rule from a random unit vector. Throws DivergenceError when |w|
/// exceeds options.divergence_norm, which means eta is too large for the
/// input scale.
Vector oja_train(const Sampler& sampler, std::size_t dimension, const OjaOptions& options, RandomStream& rng);
/// Same, from a given starting vector.
Vector oja_train(const Sampler& sampler, Vector w, const OjaOptions& options, RandomStream& rng);

/// The three steady-state properties, measured against C' = <xi xi^T>.
struct OjaDiagnostics {
    double norm = 0.0;
    double alignment = 0.0;  ///< |w . u_1|
    double angle_deg = 0.0;  ///< angle between the line of w and u_1
    double mean_y2 = 0.0;    ///< w . C' w
    double lambda_max = 0.0;
    Vector u1;
};

OjaDiagnostics oja_diagnostics(std::span<const double> w, const Matrix& second_moment);

// ---------------------------------------------------------------------------
// Banks of M linear units

/// M weight vectors of dimension N, one per row.
struct LinearUnitBank {
    Matrix weights;

    std::size_t units() const { return weights.rows(); }
    std::size_t dimension() const { return weights.cols(); }
    /// y_i = w_i . xi.
    Vector outputs(std::span<const double> xi) const;
};

/// delta w_ij = eta y_i (xi_j - sum_{k <= i} y_k w_kj).
Matrix sanger_increment(const LinearUnitBank& bank, std::span<const double> xi, double eta);
/// delta w_ij = eta y_i (xi_j - sum_{k <= M} y_k w_kj).
Matrix oja_m_increment(const LinearUnitBank& bank, std::span<const double> xi, double eta);
void sanger_step(LinearUnitBank& bank, std::span<const double> xi, double eta);
void oja_m_step(LinearUnitBank& bank, std::span<const double> xi, double eta);

/// Largest |w_i . w_k - delta_ik|.
double orthonormality_defect(const LinearUnitBank& bank);

// ---------------------------------------------------------------------------
// Competitive learning

/// M random directions of unit norm.
LinearUnitBank random_unit_bank(std::size_t units, std::size_t dimension, RandomStream& rng);
/// M weight vectors copied from distinct draws of the sampler.
LinearUnitBank bank_from_samples(std::size_t units, const Sampler& sampler, RandomStream& rng);

/// arg-min_i |w_i - xi|, lowest index on ties.
std::size_t winner(const Matrix& weights, std::span<const double> xi);

/// Moves only the winner: w_i0 += eta (xi - w_i0). Returns i0.
std::size_t competitive_step(LinearUnitBank& bank, std::span<const double> xi, double eta);

struct CompetitiveOptions {
    double eta = 0.05;
    std::size_t steps = 10000;
    std::size_t monitor_window = 1000;
};

/// H = 1/(2T) sum_t |xi_t - w_i0|^2 averaged over consecutive windows of
/// draws, using the weights each draw saw.
struct CompetitiveTrace {
    std::vector<double> energy;
};

CompetitiveTrace competitive_train(LinearUnitBank& bank, const Sampler& sampler, const CompetitiveOptions& options,
                                   RandomStream& rng);

/// Winning unit for every row of `data`.
std::vector<std::size_t> assign_clusters(const LinearUnitBank& bank, const Matrix& data);

// ---------------------------------------------------------------------------
// Kohonen's self-organising map

struct SelfOrganizingMap {
    Matrix coordinates;  ///< integer grid position r_i, one row per unit
    Matrix weights;      ///< w_i, one row per unit

    /// n units on a line at r = 0..n-1.
    static SelfOrganizingMap line(std::size_t n, std::size_t dimension);
    /// rows x cols units at r = (row, col), unit index row * cols + col.
    static SelfOrganizingMap grid(std::size_t rows, std::size_t cols, std::size_t dimension);

    std::size_t units() const { return weights.rows(); }
    std::size_t dimension() const { return weights.cols(); }
    std::size_t grid_dimension() const { return coordinates.cols(); }
    /// Largest distance between two grid positions.
    double diameter() const;
    /// Throws std::invalid_argument for repeated coordinates or mismatched rows.
    void validate() const;
};

/// exp(-|r_i - r_i0|^2 / (2 sigma^2)); the Kronecker delta for sigma = 0.
double neighbourhood(const SelfOrganizingMap& map, std::size_t i, std::size_t i0, double sigma);

/// w_i += eta Lambda(i, i0) (xi - w_i) for every unit. Returns i0.
std::size_t kohonen_step(SelfOrganizingMap& map, std::span<const double> xi, double eta, double sigma);

enum class Phase { ordering, convergence };

/// eta changes linearly and sigma geometrically from start to end.
struct PhaseSchedule {
    std::size_t steps = 0;
    double eta_start = 0.1;
    double eta_end = 0.1;
    double sigma_start = 1.0;
    double sigma_end = 1.0;

    double eta(std::size_t t) const;
    double sigma(std::size_t t) const;
    /// Throws std::invalid_argument unless rates and widths are positive and
    /// non-increasing.
    void validate() const;
};

struct KohonenSchedule {
    PhaseSchedule ordering;
    PhaseSchedule convergence;

    /// Ordering: eta 0.1, sigma half the grid diameter, 10^4 steps.
    /// Convergence: eta 0.1 -> 0.01, sigma -> 0.5, 10^5 steps.
    static KohonenSchedule standard(const SelfOrganizingMap& map);
};

struct KohonenRecord {
    Phase phase = Phase::ordering;
    std::size_t step = 0;  ///< draws completed within the phase
    double energy = 0.0;   ///< 1/(2T) sum_t sum_i Lambda(i, i0) |xi_t - w_i|^2 over the window
};

struct KohonenTrace {
    std::vector<KohonenRecord> records;
};

/// Runs the ordering then the convergence phase.
KohonenTrace kohonen_train(SelfOrganizingMap& map, const Sampler& sampler, const KohonenSchedule& schedule,
                           RandomStream& rng, std::size_t monitor_window = 1000);

/// Weights initialised to distinct draws of the sampler.
void initialize_from_samples(SelfOrganizingMap& map, const Sampler& sampler, RandomStream& rng);

/// Number of pairs of non-adjacent grid-line segments of a 2-D map that
/// cross in the plane of the first two weight components.
std::size_t count_crossings(const SelfOrganizingMap& map);

/// Uniform density on the parallelogram spanned by (1, 0) and (0.5, 1).
Sampler parallelogram_sampler();

struct DensityPoint {
    double w = 0.0;
    double rho_hat = 0.0;
    double p = 0.0;
};

struct DensityFit {
    double exponent = 0.0;  ///< NaN when flat
    bool flat = false;      ///< P is constant over the fitted units
    std::vector<DensityPoint> points;
};

/// Least-squares slope of log rho_hat(w) against log P(w) for a 1-D map,
/// rho_hat_i = 2 / |w_{i+1} - w_{i-1}|. The first and last `edge_fraction`
/// of the units are left out. Throws Error unless the weights are strictly
/// monotone.
DensityFit kohonen_density_exponent(const SelfOrganizingMap& map, const std::function<double(double)>& density,
                                    double edge_fraction = 0.1);

/// CSV with columns r1[,r2],w1,...,wN, one row per unit.
void write_map_csv(std::ostream& out, const SelfOrganizingMap& map);

}  // namespace neuro::unsupervised
