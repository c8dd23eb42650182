#pragma once

// Stochastic +-1 output units and the associative reward-penalty algorithm.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "neuro/numerics.hpp"

namespace neuro::reinforce {

/// Output error delta_i = t_i - <O_i> (plain) or with the extra factor
/// beta (1 - <O_i>^2) (with_gain).
enum class ErrorForm { plain, with_gain };

struct StochasticOutputLayer {
    Matrix weights;  ///< M x N, b = W V
    double beta = 1.0;
    double eta_plus = 0.1;
    double eta_minus = 0.01;
    ErrorForm form = ErrorForm::plain;

    std::size_t outputs() const { return weights.rows(); }
    std::size_t inputs() const { return weights.cols(); }
    /// Throws std::invalid_argument unless beta > 0 and eta_plus >= eta_minus > 0.
    void validate() const;
};

/// (1 + exp(-2 beta b))^-1; exactly 1/2 at b = 0, also for infinite beta.
double fire_probability(double beta, double b);
/// tanh(beta b), with the same convention at b = 0.
double mean_output(double beta, double b);

Vector local_fields(const StochasticOutputLayer& layer, std::span<const double> v);
Vector mean_outputs(const StochasticOutputLayer& layer, std::span<const double> v);

/// O_i = +1 with probability fire_probability(beta, b_i), else -1.
Vector stochastic_output(const StochasticOutputLayer& layer, std::span<const double> v, RandomStream& rng);

/// xi_i = O_i on reward (r = +1), -O_i on penalty (r = -1).
Vector effective_targets(std::span<const double> o, int r);

/// delta_i for target t in the layer's error form.
Vector output_errors(const StochasticOutputLayer& layer, std::span<const double> v, std::span<const double> t);

/// eta delta_i V_j.
Matrix supervised_increment(const StochasticOutputLayer& layer, std::span<const double> v,
                            std::span<const double> t, double eta);

/// Reward: eta_plus (O_i - <O_i>) V_j. Penalty: eta_minus (-O_i - <O_i>) V_j.
/// Uses the layer's error form. Throws std::invalid_argument unless r is +-1.
Matrix arp_increment(const StochasticOutputLayer& layer, std::span<const double> v, std::span<const double> o,
                     int r);

void apply_increment(StochasticOutputLayer& layer, const Matrix& dw);

/// <H> = sum_mu sum_i (1 - t_i tanh(beta b_i)), rows of `inputs` and `targets`.
double mean_energy(const StochasticOutputLayer& layer, const Matrix& inputs, const Matrix& targets);

/// First-order change of <H> for one pattern under the with_gain supervised
/// step: -eta beta^2 sum_i (1 - <O_i>^2)^2 (1 - t_i <O_i>) |V|^2.
double mean_energy_change(const StochasticOutputLayer& layer, std::span<const double> v,
                          std::span<const double> t, double eta);

/// Returns the reinforcement signal r for pattern mu given the sampled output.
using Environment = std::function<int(std::size_t mu, std::span<const double> o)>;

/// Rewards an output only when every component matches the target row.
Environment exact_match_environment(const Matrix& targets);

struct ArpOptions {
    std::size_t steps = 20000;
    std::size_t monitor_window = 1000;
};

struct ArpTrace {
    std::vector<double> reward_rate;  ///< fraction of rewards per window
};

/// Random patterns, sampled outputs, reward from the environment, arp_increment.
ArpTrace arp_train(StochasticOutputLayer& layer, const Matrix& inputs, const Environment& environment,
                   const ArpOptions& options, RandomStream& rng);

/// Fraction of patterns whose deterministic readout sgn(b) misses any target
/// component (b = 0 counts as wrong).
double classification_error(const StochasticOutputLayer& layer, const Matrix& inputs, const Matrix& targets);

struct SeparableToy {
    Matrix inputs;   ///< p x (n + 1), last column the constant 1
    Matrix targets;  ///< p x 1, sgn(w* . xi) with |w* . xi| >= margin
};

/// Gaussian patterns plus a constant bias input, labelled by a random unit
/// teacher and redrawn until each clears the margin.
SeparableToy separable_toy(std::size_t patterns, std::size_t dimension, double margin, RandomStream& rng);

}  // namespace neuro::reinforce
