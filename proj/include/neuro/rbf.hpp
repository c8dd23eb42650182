#pragma once

// Cover's counting of homogeneously separable dichotomies and radial
// basis-function networks with the hybrid trainer: competitive learning for
// the centres, supervised fitting of the linear output unit.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "neuro/feedforward.hpp"
#include "neuro/numerics.hpp"

namespace neuro::rbf {

// ---------------------------------------------------------------------------
// Cover's theorem

/// sum_{k<m} C(p-1, k), the numerator of P(p, m) over 2^(p-1). Exact for
/// p <= 64; throws std::invalid_argument beyond that.
std::uint64_t cover_count(std::size_t p, std::size_t m);

/// P(p, m) = 1 for p <= m, else 2^(1-p) sum_{k<m} C(p-1, k). Exact integer
/// arithmetic for p <= 64, long double binomial recursion above.
double cover_probability(std::size_t p, std::size_t m);

struct MaxSeparable {
    double mean = 0.0;   ///< sum_n n p_n
    double mass = 0.0;   ///< sum_n p_n
    std::size_t terms = 0;
};

/// Distribution p_n = 2^-n C(n-1, m-1) of the largest separable prefix,
/// summed until the terms past the peak fall below `cutoff`.
MaxSeparable expected_max_separable(std::size_t m, double cutoff = 1e-15);

/// Fraction of `trials` random problems (p points uniform in the unit ball
/// of dimension m, random +-1 targets) that the zero-threshold perceptron
/// separates within `update_cap` updates (default 10^4 p).
Estimate separability_mc(std::size_t p, std::size_t m, std::size_t trials, RandomStream& rng,
                         std::size_t update_cap = 0);

/// Zero-threshold perceptron: W += t u on each misclassified pattern
/// (t W.u <= 0), sweeping in order. True when a sweep makes no update.
bool perceptron_separates(const Matrix& points, std::span<const double> targets, std::size_t update_cap);

// ---------------------------------------------------------------------------
// Networks

/// m centres w_j with widths s_j, output O = sum_j W_j u_j - threshold.
/// The threshold stays 0 unless a trainer is told to fit it.
struct RbfNetwork {
    Matrix centers;  ///< m x N
    Vector widths;
    Vector weights;
    double threshold = 0.0;

    std::size_t size() const { return centers.rows(); }
    std::size_t input_dimension() const { return centers.cols(); }
    /// Throws std::invalid_argument for non-positive widths or mismatched sizes.
    void validate() const;
};

/// u_j = exp(-|xi - w_j|^2 / (2 s_j^2)).
Vector rbf_embed(const RbfNetwork& net, std::span<const double> xi);
double rbf_output(const RbfNetwork& net, std::span<const double> xi);
/// One output per row of `inputs`, as a p x 1 matrix.
Matrix rbf_outputs(const RbfNetwork& net, const Matrix& inputs);

/// U_ij = u_j(xi_i).
Matrix design_matrix(const RbfNetwork& net, const Matrix& inputs);

/// s_j = min_{k != j} |w_j - w_k|. A width whose nearest centre coincides
/// with it keeps its previous value.
void update_widths(RbfNetwork& net);

enum class CenterInit { uniform, patterns };
enum class OutputFit { automatic, exact, gradient };

struct RbfOptions {
    std::size_t centers = 2;
    CenterInit init = CenterInit::uniform;  ///< uniform: each coordinate from [-1, 1]
    double eta_centers = 0.05;
    std::size_t center_steps = 10000;
    OutputFit fit = OutputFit::automatic;   ///< automatic: exact when m = p
    double eta_output = 0.05;
    std::size_t output_steps = 20000;
    bool fit_threshold = false;
};

struct RbfTraining {
    RbfNetwork net;
    double energy = 0.0;  ///< H = 1/2 sum (t - O)^2 on the training set
    bool exact = false;   ///< output weights from the linear solve
    std::string diagnostic;
};

/// Centres by competitive learning (winner = largest u_j, widths updated
/// before every move), then output weights. Uses the first target column.
RbfTraining rbf_train(const feedforward::LabeledSet& data, const RbfOptions& options, RandomStream& rng);

/// Output weights only, centres and widths kept. Exact mode solves U W = t
/// and needs m = p (plus one column when fitting the threshold); a singular
/// U falls back to gradient descent and says so in the diagnostic.
RbfTraining fit_output(RbfNetwork net, const feedforward::LabeledSet& data, const RbfOptions& options,
                       RandomStream& rng);

/// The XOR problem with 0/1 inputs and the given target convention.
feedforward::LabeledSet xor_data(feedforward::TargetConvention convention);

}  // namespace neuro::rbf
