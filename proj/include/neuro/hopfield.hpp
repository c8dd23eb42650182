#pragma once

// Binary associative memory: pattern containers, Hebb-rule weights,
// deterministic and stochastic spin dynamics, energy bookkeeping, order
// parameters and cross-talk statistics.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neuro/numerics.hpp"

namespace neuro::hopfield {

/// sgn with the convention sgn(0) = +1.
constexpr int sgn(double b) { return b >= 0.0 ? 1 : -1; }

/// p patterns of N bits, every entry +1 or -1.
class PatternSet {
public:
    PatternSet(std::size_t p, std::size_t n, std::vector<int> bits);
    static PatternSet from_rows(const std::vector<std::vector<int>>& rows);
    /// Independent, equiprobable +-1 bits.
    static PatternSet random(std::size_t p, std::size_t n, RandomStream& rng);

    std::size_t p() const { return p_; }
    std::size_t n() const { return n_; }
    /// Storage capacity p / N.
    double alpha() const { return static_cast<double>(p_) / static_cast<double>(n_); }

    int operator()(std::size_t mu, std::size_t i) const { return bits_[mu * n_ + i]; }
    std::span<const int> pattern(std::size_t mu) const { return {bits_.data() + mu * n_, n_}; }

    friend bool operator==(const PatternSet&, const PatternSet&) = default;

private:
    std::size_t p_;
    std::size_t n_;
    std::vector<int> bits_;
};

/// Pattern file: first line "p N", then p lines of N space-separated +-1 values.
PatternSet read_patterns(std::istream& in);
void write_patterns(std::ostream& out, const PatternSet& patterns);
PatternSet load_patterns(const std::string& path);
void save_patterns(const std::string& path, const PatternSet& patterns);

enum class DiagonalMode { kept, zeroed };

/// Symmetric weight matrix with thresholds.
class HopfieldNet {
public:
    HopfieldNet(Matrix weights, Vector thresholds, DiagonalMode diagonal);

    std::size_t size() const { return weights_.rows(); }
    const Matrix& weights() const { return weights_; }
    const Vector& thresholds() const { return thresholds_; }
    DiagonalMode diagonal() const { return diagonal_; }

    /// b_i = sum_j w_ij S_j - theta_i
    double local_field(std::span<const int> state, std::size_t i) const;

private:
    Matrix weights_;
    Vector thresholds_;
    DiagonalMode diagonal_;
};

using SpinState = std::vector<int>;

/// w_ij = (1/N) sum_mu xi_i^mu xi_j^mu, thresholds zero.
HopfieldNet hebb_weights(const PatternSet& patterns, DiagonalMode diagonal);

/// w_ij = (1/N) sum_{mu,nu} xi_i^mu (Q^-1)_{mu nu} xi_j^nu with overlap matrix
/// Q_{mu nu} = xi^mu . xi^nu / N. Every stored pattern is then an exact
/// eigenvector with eigenvalue 1. Throws SingularMatrixError for linearly
/// dependent patterns.
HopfieldNet hebb_pseudoinverse(const PatternSet& patterns);

/// Hebb's rule restricted to K randomly chosen incoming connections per
/// neuron: w_ij = (1/K) sum_mu xi_i^mu xi_j^mu c_ij. Not symmetric in general,
/// so the result is returned as a plain matrix.
Matrix diluted_hebb_weights(const PatternSet& patterns, std::size_t connections, RandomStream& rng);

/// Number of positions where a and b differ.
std::size_t hamming_distance(std::span<const int> a, std::span<const int> b);

/// m = (1/N) sum_i S_i xi_i
double overlap(std::span<const int> state, std::span<const int> pattern);

enum class UpdateMode { synchronous, async_random, async_typewriter };

/// One deterministic update. Synchronous updates every neuron from the old
/// state; asynchronous updates a single neuron, chosen uniformly at random or,
/// for typewriter order, neuron `step % N`.
SpinState update_deterministic(const HopfieldNet& net, SpinState state, UpdateMode mode, RandomStream& rng,
                               std::size_t step = 0);

/// Repeats deterministic updates until a full sweep changes nothing.
/// Returns nullopt if no fixed point is reached within max_sweeps.
std::optional<SpinState> relax_deterministic(const HopfieldNet& net, SpinState state, UpdateMode mode,
                                             RandomStream& rng, std::size_t max_sweeps = 1000);

bool is_fixed_point(const HopfieldNet& net, std::span<const int> state);

/// Running order parameter m_mu(T) = (1/T) sum_t m_mu(t), sampled once per
/// sweep (N asynchronous updates).
struct OrderParameterTrace {
    std::vector<double> instantaneous;  ///< m_mu(t) after each sweep
    std::vector<double> running_mean;   ///< m_mu(T) after each sweep
    std::size_t transient = 0;          ///< sweeps discarded before averaging
    double steady_mean = 0.0;
    double steady_stderr = 0.0;  ///< batch-means standard error
};

struct StochasticOptions {
    std::size_t sweeps = 1000;
    /// Sweeps discarded before the steady-state average; default max(100, N),
    /// capped at half the run.
    std::optional<std::size_t> transient;
};

struct StochasticRun {
    SpinState state;
    OrderParameterTrace trace;
};

/// P(b) = 1 / (1 + exp(-2 beta b))
double stochastic_probability(double beta, double b);

/// Asynchronous random-site stochastic dynamics: the chosen spin becomes +1
/// with probability P(b_i). beta = +infinity gives the deterministic rule.
/// The order parameter is measured against `reference`.
StochasticRun update_stochastic(const HopfieldNet& net, SpinState state, double beta, RandomStream& rng,
                                std::span<const int> reference, const StochasticOptions& options = {});

/// H = -1/2 sum_ij w_ij S_i S_j + sum_i theta_i S_i
double energy(const HopfieldNet& net, std::span<const int> state);

/// C_i^nu = -xi_i^nu (1/N) sum_{j != i} sum_{mu != nu} xi_i^mu xi_j^mu xi_j^nu.
/// Bit i of pattern nu flips after one asynchronous step iff C_i^nu > 1.
double cross_talk(const PatternSet& patterns, std::size_t i, std::size_t nu);

/// One cross-talk value for a freshly drawn random pattern set, random i and
/// nu. Patterns are generated bit-packed, so N = 1000, p = 185 costs a few
/// microseconds.
double sample_cross_talk(std::size_t n, std::size_t p, RandomStream& rng);

/// Fraction of draws with C_i^nu > 1, with binomial standard error.
Estimate one_step_error_mc(std::size_t n, std::size_t p, std::size_t trials, RandomStream& rng);

/// 1/2 [1 - erf(1 / sqrt(2 alpha))]
double p_error_formula(double alpha);

/// xi^mix_i = sgn(sum_k s_k xi_i^(indices_k)) for an odd number of patterns.
/// `signs` may be empty (all +1).
std::vector<int> mixed_state(const PatternSet& patterns, std::span<const std::size_t> indices,
                             std::span<const int> signs = {});

}  // namespace neuro::hopfield
