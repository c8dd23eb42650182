#pragma once

// Recurrent networks: recurrent backpropagation through relaxation to fixed
// points, and backpropagation through time for sequence tasks, with the
// truncated variant.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include "neuro/feedforward.hpp"
#include "neuro/numerics.hpp"

namespace neuro::recurrent {

using feedforward::Activation;

/// N hidden units, K inputs, M outputs.
///   b = w_vv V + w_vx x - theta_v,  V = g(b)
///   B = w_ov V - theta_o,           O = g_out(B)
/// The output layer is only used by backpropagation through time; recurrent
/// backpropagation reads its outputs off a subset of the hidden units.
struct RecurrentNet {
    Matrix w_vv;  ///< N x N
    Matrix w_vx;  ///< N x K
    Matrix w_ov;  ///< M x N
    Vector theta_v;
    Vector theta_o;
    double tau = 1.0;
    Activation g = Activation::tanh;
    Activation g_out = Activation::identity;

    RecurrentNet() = default;
    RecurrentNet(std::size_t hidden, std::size_t inputs, std::size_t outputs);

    std::size_t hidden_count() const { return w_vv.rows(); }
    std::size_t input_count() const { return w_vx.cols(); }
    std::size_t output_count() const { return w_ov.rows(); }

    /// Gaussian weights with the given standard deviation, zero thresholds.
    void initialize(RandomStream& rng, double stddev);
    /// Throws std::invalid_argument when the shapes do not compose, tau is
    /// not positive or an activation is not element-wise with a derivative.
    void validate() const;
};

/// Flattened parameters in the order w_vv, w_vx, w_ov, theta_v, theta_o.
Vector parameters(const RecurrentNet& net);
void set_parameters(RecurrentNet& net, std::span<const double> p);

// ---------------------------------------------------------------------------
// Recurrent backpropagation

struct RelaxOptions {
    std::optional<double> dt;  ///< defaults to tau / 10
    std::size_t max_steps = 100000;
    double tol = 1e-9;
};

/// Result of a forward-Euler relaxation. When `converged` is false the
/// state is whatever the last step produced and `report` says why.
struct Relaxation {
    Vector state;
    Vector fields;  ///< b at the returned state (states only)
    std::size_t steps = 0;
    bool converged = false;
    double residual = 0.0;  ///< max |x - F(x)| at the returned state
    std::string report;
};

/// Integrates tau dV/dt = -V + g(b) from V = 0 by forward Euler until
/// tau |dV/dt| = |g(b) - V| drops below tol in every component.
Relaxation relax_states(const RecurrentNet& net, std::span<const double> input,
                        const RelaxOptions& options = {});

/// Integrates tau dD_j/dt = -D_j + sum_i D_i w_ij g'(b_j) + g'(b_j) E_j
/// at the fixed point `states`. `errors` has one entry per hidden unit
/// (zero for units without a target). Not converged when `states` is not.
Relaxation relax_errors(const RecurrentNet& net, const Relaxation& states,
                        std::span<const double> errors, const RelaxOptions& options = {});

/// Direct solve of the error fixed point: D = g'(b) . (L^-1)^T E with
/// L = I - diag(g'(b)) w_vv.
Vector solve_errors(const RecurrentNet& net, std::span<const double> fields,
                    std::span<const double> errors);

/// E_k = y_k - V_k on the listed output units, zero elsewhere.
Vector output_errors(std::span<const double> state, std::span<const std::size_t> output_units,
                     std::span<const double> targets);

/// H* = 1/2 sum_k (y_k - V*_k)^2 after relaxation. Nullopt on divergence.
std::optional<double> steady_energy(const RecurrentNet& net, std::span<const double> input,
                                    std::span<const std::size_t> output_units,
                                    std::span<const double> targets,
                                    const RelaxOptions& options = {});

struct BpStep {
    bool updated = false;  ///< false when a relaxation diverged; net untouched
    double energy = 0.0;   ///< H* before the update
    std::string report;
};

/// One step of recurrent backpropagation on a single pattern:
///   w_vv_mn += eta D_m V_n,  w_vx_mn += eta D_m x_n,  theta_v_m -= eta D_m.
BpStep recurrent_bp_step(RecurrentNet& net, std::span<const double> input,
                         std::span<const std::size_t> output_units,
                         std::span<const double> targets, double eta,
                         const RelaxOptions& options = {});

// ---------------------------------------------------------------------------
// Backpropagation through time

/// Rows are time steps 1..T.
struct SequenceTask {
    Matrix inputs;   ///< T x K
    Matrix targets;  ///< T x M

    std::size_t length() const { return inputs.rows(); }
    void validate() const;
};

/// Forward pass over a sequence. `states` has T + 1 rows, row 0 is V_0.
struct SequenceTrace {
    Matrix states;
    Matrix fields;         ///< b_t, T x N
    Matrix output_fields;  ///< B_t, T x M
    Matrix outputs;        ///< O_t, T x M
};

SequenceTrace run_sequence(const RecurrentNet& net, const Matrix& inputs,
                           std::span<const double> initial_state = {});

/// H = 1/2 sum_t sum_i (y_t,i - O_t,i)^2.
double sequence_energy(const RecurrentNet& net, const SequenceTask& task,
                       std::span<const double> initial_state = {});

/// dH/d(parameter) for every weight and threshold. The gradient-descent
/// increments are -eta times these.
struct BpttGradients {
    Matrix w_vv;
    Matrix w_vx;
    Matrix w_ov;
    Vector theta_v;
    Vector theta_o;
    double energy = 0.0;
    Matrix deltas;  ///< delta_t as rows, T x N

    /// Same order as parameters(net).
    Vector flatten() const;
};

BpttGradients bptt_gradients(const RecurrentNet& net, const SequenceTask& task,
                             std::span<const double> initial_state = {});

/// Each output error is propagated back at most tau_trunc time steps,
/// counting its own. tau_trunc = 1 keeps only the direct terms;
/// tau_trunc >= T equals bptt_gradients.
BpttGradients bptt_truncated(const RecurrentNet& net, const SequenceTask& task,
                             std::size_t tau_trunc, std::span<const double> initial_state = {});

/// net -= eta * gradients.
void apply_gradients(RecurrentNet& net, const BpttGradients& gradients, double eta);

/// Sequence file: header "T N_in N_out", then T lines of N_in inputs
/// followed by N_out targets.
SequenceTask read_sequence_task(std::istream& in);
void write_sequence_task(std::ostream& out, const SequenceTask& task);
SequenceTask load_sequence_task(const std::string& path);
void save_sequence_task(const std::string& path, const SequenceTask& task);

}  // namespace neuro::recurrent
