#pragma once

// Reusable experiment protocols shared by the command-line harness and the
// acceptance checks.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "neuro/anneal.hpp"
#include "neuro/feedforward.hpp"
#include "neuro/numerics.hpp"
#include "neuro/unsupervised.hpp"

namespace neuro::protocols {

// ---------------------------------------------------------------------------
// XOR with a ReLU hidden layer and a sigmoid output

struct XorProtocol {
    double eta = 0.1;
    std::size_t steps = 10000;  ///< single-pattern updates
    double init_std = 0.1;
    double max_norm = 2.0;
    bool plus_minus_inputs = true;
    std::size_t prune_every = 1000;
    std::size_t prune_to = 2;
};

/// Four XOR patterns, 0/1 targets, inputs 0/1 or +-1.
feedforward::LabeledSet xor_training_set(bool plus_minus_inputs);

/// 2-hidden-1 net trained with cross-entropy; true when all four patterns
/// are classified correctly.
bool xor_trial(std::size_t hidden, const XorProtocol& protocol, RandomStream& rng);

/// Starts with `hidden` units and removes the one of least summed OBS
/// saliency every `prune_every` steps until `prune_to` remain; the
/// survivors are then reset to their initial weights and retrained.
bool xor_pruned_trial(std::size_t hidden, const XorProtocol& protocol, RandomStream& rng);

/// Success fraction over `seeds` independent trials, each on its own split
/// of a stream seeded with `seed`.
Estimate xor_success(std::size_t hidden, const XorProtocol& protocol, std::size_t seeds, std::uint64_t seed,
                     bool pruned);

// ---------------------------------------------------------------------------
// Annealing

struct TourSearch {
    std::vector<std::size_t> order;  ///< canonical
    double length = 0.0;
};

/// Best tour over independent annealing restarts.
TourSearch tsp_restarts(const anneal::TspModel& model, std::size_t restarts, const anneal::Schedule& schedule,
                        RandomStream& rng);

/// Schedule that finds the seven-city optimum reliably.
anneal::Schedule tsp_schedule();

struct DigestSearch {
    std::map<anneal::DigestOrdering, std::size_t> found;  ///< zero-energy orderings and hit counts
    std::size_t restarts = 0;
    std::size_t hits = 0;
    double best_energy = 0.0;
};

/// Restarts that stop at H = 0.
DigestSearch digest_restarts(const anneal::DigestInstance& instance, std::size_t restarts,
                             const anneal::Schedule& schedule, RandomStream& rng);

// ---------------------------------------------------------------------------
// Unsupervised learning

/// The three points whose second moment is (1/3)[[2, 1], [1, 2]].
Matrix three_point_data();

enum class Density { ramp, uniform, quadratic };

Density parse_density(const std::string& name);
std::string to_string(Density density);
/// P(x) on [0, 1]: 2x, 1 or 3x^2.
double density_value(Density density, double x);
/// Inverse-transform draws from P.
unsupervised::Sampler density_sampler(Density density);
/// The exponent of rho ~ P^exponent predicted for 1-D maps.
constexpr double kohonen_exponent = 2.0 / 3.0;

struct DensityRun {
    unsupervised::SelfOrganizingMap map;
    unsupervised::DensityFit fit;
};

/// 1-D map trained with the standard schedule, then fitted.
DensityRun kohonen_density_run(std::size_t units, Density density, RandomStream& rng);

// ---------------------------------------------------------------------------
// Hopfield statistics

/// Mean over random p = 3 pattern sets of N bits of the overlap between
/// each pattern and the symmetric mixed state; one sample per pattern set.
Estimate mixed_state_overlap(std::size_t n, std::size_t trials, RandomStream& rng);

/// Largest energy increase seen when applying every asynchronous
/// deterministic update to every state of `nets` random Hebb nets with
/// 2 <= N <= max_n. Non-positive means the energy never rose.
double max_energy_increase(std::size_t nets, std::size_t max_n, RandomStream& rng);

// ---------------------------------------------------------------------------
// Gradient audit

struct AuditRow {
    std::string check;
    std::size_t instances = 0;
    double max_error = 0.0;  ///< largest norm-wise relative error
    double tolerance = 0.0;
    bool pass() const { return max_error < tolerance; }
};

/// Backprop against central differences for dense, convolution, pooling
/// and batchnorm layers, the three losses, recurrent backprop and BPTT at
/// T = 5, `instances` random cases each.
std::vector<AuditRow> gradient_audit(std::size_t instances, RandomStream& rng);

}  // namespace neuro::protocols
