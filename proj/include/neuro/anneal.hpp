#pragma once

// Markov-chain Monte Carlo with Metropolis and Glauber kernels, exact
// detailed-balance checks on enumerable models, simulated annealing, and the
// travelling-salesman, k-queens and double-digest energy models.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "neuro/hopfield.hpp"
#include "neuro/numerics.hpp"

namespace neuro::anneal {

template <typename C>
struct Proposal {
    C candidate;
    double delta;  ///< energy(candidate) - energy(current)
};

/// A configuration space with an energy and a symmetric proposal scheme.
template <typename M>
concept EnergyModel = requires(const M& m, const typename M::Config& c, RandomStream& rng) {
    { m.energy(c) } -> std::convertible_to<double>;
    { m.propose(c, rng) } -> std::same_as<Proposal<typename M::Config>>;
    { m.is_valid(c) } -> std::convertible_to<bool>;
    { m.sweep_size() } -> std::convertible_to<std::size_t>;
};

/// Small models whose states can be listed and whose proposal probabilities
/// are known exactly.
template <typename M>
concept EnumerableModel = EnergyModel<M> && requires(const M& m, const typename M::Config& c) {
    { m.states() } -> std::same_as<std::vector<typename M::Config>>;
    { m.proposal_probability(c, c) } -> std::convertible_to<double>;
};

enum class Kernel { metropolis, glauber };

/// Metropolis: min(1, e^{-beta dH}).  Glauber: 1 / (1 + e^{beta dH}).
/// beta = +infinity is the zero-temperature limit.
double acceptance_probability(Kernel kernel, double beta, double delta);

/// One proposal plus accept/reject, updating config and energy in place.
template <EnergyModel M>
bool mcmc_step(const M& model, typename M::Config& config, double& energy, Kernel kernel, double beta,
               RandomStream& rng) {
    if (!(beta >= 0.0)) throw Error("mcmc_step: beta must be non-negative");
    auto prop = model.propose(config, rng);
    const double p = acceptance_probability(kernel, beta, prop.delta);
    const bool accept = p >= 1.0 || (p > 0.0 && rng.uniform() < p);
    if (accept) {
        config = std::move(prop.candidate);
        energy += prop.delta;
    }
    return accept;
}

template <EnergyModel M>
std::pair<typename M::Config, bool> metropolis_step(const M& model, typename M::Config config, double beta,
                                                   RandomStream& rng) {
    double e = model.energy(config);
    const bool a = mcmc_step(model, config, e, Kernel::metropolis, beta, rng);
    return {std::move(config), a};
}

template <EnergyModel M>
typename M::Config glauber_step(const M& model, typename M::Config config, double beta, RandomStream& rng) {
    double e = model.energy(config);
    mcmc_step(model, config, e, Kernel::glauber, beta, rng);
    return config;
}

// ---------------------------------------------------------------------------
// Exact checks on enumerable models

/// p_{l->k} = p^s_{l->k} p^a_{l->k} off the diagonal; rows sum to one.
template <EnumerableModel M>
Matrix transition_matrix(const M& model, Kernel kernel, double beta) {
    const auto states = model.states();
    const std::size_t n = states.size();
    Matrix p(n, n);
    for (std::size_t l = 0; l < n; ++l) {
        const double hl = model.energy(states[l]);
        double off = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == l) continue;
            const double ps = model.proposal_probability(states[l], states[k]);
            if (ps == 0.0) continue;
            p(l, k) = ps * acceptance_probability(kernel, beta, model.energy(states[k]) - hl);
            off += p(l, k);
        }
        p(l, l) = 1.0 - off;
    }
    return p;
}

/// Normalised e^{-beta H} over the listed states.
template <EnumerableModel M>
Vector boltzmann_distribution(const M& model, double beta) {
    const auto states = model.states();
    Vector h(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) h[i] = model.energy(states[i]);
    const double hmin = *std::min_element(h.begin(), h.end());
    double z = 0.0;
    for (auto& v : h) z += (v = std::exp(-beta * (v - hmin)));
    for (auto& v : h) v /= z;
    return h;
}

/// |P(n_l) p_{l->k} - P(n_k) p_{k->l}| from exact transition probabilities.
template <EnumerableModel M>
double detailed_balance_check(const M& model, Kernel kernel, double beta, std::size_t l, std::size_t k) {
    const Matrix p = transition_matrix(model, kernel, beta);
    const Vector pi = boltzmann_distribution(model, beta);
    return std::abs(pi[l] * p(l, k) - pi[k] * p(k, l));
}

struct BalanceReport {
    double detailed_balance = 0.0;  ///< max over all pairs
    double stationarity = 0.0;      ///< max_k |(pi P)_k - pi_k|
    double row_sum = 0.0;           ///< max_l |sum_k P_lk - 1|
    std::size_t states = 0;
};

template <EnumerableModel M>
BalanceReport check_balance(const M& model, Kernel kernel, double beta) {
    const Matrix p = transition_matrix(model, kernel, beta);
    const Vector pi = boltzmann_distribution(model, beta);
    const std::size_t n = pi.size();
    BalanceReport r;
    r.states = n;
    for (std::size_t l = 0; l < n; ++l) {
        double row = 0.0, col = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            row += p(l, k);
            col += pi[k] * p(k, l);
            r.detailed_balance = std::max(r.detailed_balance, std::abs(pi[l] * p(l, k) - pi[k] * p(k, l)));
        }
        r.stationarity = std::max(r.stationarity, std::abs(col - pi[l]));
        r.row_sum = std::max(r.row_sum, std::abs(row - 1.0));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Annealing

/// Geometric schedule: stage s runs `sweeps_per_stage` sweeps at
/// beta0 * multiplier^s.
struct Schedule {
    double beta0 = 0.5;
    double multiplier = 1.1;
    std::size_t sweeps_per_stage = 1000;
    std::size_t stages = 50;

    double beta(std::size_t stage) const { return beta0 * std::pow(multiplier, double(stage)); }
};

template <typename C>
struct AnnealResult {
    C best;
    double best_energy;
    std::vector<double> stage_mean_energy;  ///< mean energy over each stage's steps
    std::size_t steps = 0;
};

struct AnnealOptions {
    Kernel kernel = Kernel::metropolis;
    /// Stop as soon as the best energy drops to this value or below.
    std::optional<double> target_energy;
};

template <EnergyModel M>
AnnealResult<typename M::Config> anneal(const M& model, typename M::Config config, const Schedule& schedule,
                                        RandomStream& rng, const AnnealOptions& options = {}) {
    if (schedule.stages == 0) throw Error("anneal: need at least one stage");
    double e = model.energy(config);
    AnnealResult<typename M::Config> r{config, e, {}, 0};
    auto reached = [&] { return options.target_energy && r.best_energy <= *options.target_energy; };
    const std::size_t per_stage = schedule.sweeps_per_stage * model.sweep_size();
    for (std::size_t s = 0; s < schedule.stages && !reached(); ++s) {
        const double beta = schedule.beta(s);
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t t = 0; t < per_stage; ++t) {
            mcmc_step(model, config, e, options.kernel, beta, rng);
            ++r.steps;
            sum += e;
            ++count;
            if (e < r.best_energy) {
                // re-evaluate to keep accumulated rounding out of the reported value
                e = model.energy(config);
                r.best = config;
                r.best_energy = e;
                if (reached()) break;
            }
        }
        r.stage_mean_energy.push_back(sum / double(count));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Toy models for exact checks

/// Two states with energies h0 and h1; the proposal always suggests the other.
class TwoLevelModel {
public:
    using Config = int;
    TwoLevelModel(double h0, double h1) : h_{h0, h1} {}
    double energy(int s) const { return h_[s]; }
    Proposal<int> propose(int s, RandomStream&) const { return {1 - s, h_[1 - s] - h_[s]}; }
    bool is_valid(int s) const { return s == 0 || s == 1; }
    std::size_t sweep_size() const { return 1; }
    std::vector<int> states() const { return {0, 1}; }
    double proposal_probability(int a, int b) const { return a != b ? 1.0 : 0.0; }

private:
    double h_[2];
};

/// Single-spin-flip dynamics on the energy of a Hopfield net; a uniformly
/// chosen spin is proposed for flipping.
class SpinFlipModel {
public:
    using Config = std::vector<int>;
    explicit SpinFlipModel(hopfield::HopfieldNet net) : net_(std::move(net)) {}
    double energy(const Config& s) const { return hopfield::energy(net_, s); }
    Proposal<Config> propose(const Config& s, RandomStream& rng) const;
    bool is_valid(const Config& s) const;
    std::size_t sweep_size() const { return net_.size(); }
    std::vector<Config> states() const;
    double proposal_probability(const Config& a, const Config& b) const;

private:
    hopfield::HopfieldNet net_;
};

// ---------------------------------------------------------------------------
// Travelling salesman

struct City {
    double x;
    double y;
};

/// Square 0/1 matrix. For tours, row m is a city and column j a position in
/// the visiting order.
class BinaryMatrix {
public:
    explicit BinaryMatrix(std::size_t k) : k_(k), bits_(k * k, 0) {}
    BinaryMatrix(std::size_t k, std::vector<std::uint8_t> bits);
    /// city order[j] is visited at position j
    static BinaryMatrix from_order(const std::vector<std::size_t>& order);

    std::size_t size() const { return k_; }
    int operator()(std::size_t i, std::size_t j) const { return bits_[i * k_ + j]; }
    void set(std::size_t i, std::size_t j, int v);
    void swap_rows(std::size_t a, std::size_t b);
    /// Exactly one 1 in every row and every column.
    bool is_permutation() const;
    /// Visiting order; throws unless is_permutation().
    std::vector<std::size_t> order() const;

    friend bool operator==(const BinaryMatrix&, const BinaryMatrix&) = default;
    friend auto operator<=>(const BinaryMatrix&, const BinaryMatrix&) = default;

private:
    std::size_t k_;
    std::vector<std::uint8_t> bits_;
};

using TourMatrix = BinaryMatrix;

class TspInstance {
public:
    explicit TspInstance(std::vector<City> cities);
    std::size_t size() const { return cities_.size(); }
    const std::vector<City>& cities() const { return cities_; }
    double distance(std::size_t m, std::size_t n) const { return d_(m, n); }
    double max_distance() const;

private:
    std::vector<City> cities_;
    Matrix d_;
};

/// TSP file: first line k, then k lines "x y".
TspInstance read_tsp(std::istream& in);
void write_tsp(std::ostream& out, const TspInstance& instance);
TspInstance load_tsp(const std::string& path);

/// Cities A..G of the seven-city example, in that order.
TspInstance seven_city_instance();

/// L = 1/2 sum_{mnj} d_mn M_mj (M_n,j-1 + M_n,j+1), column index cyclic.
double tsp_path_length(const TourMatrix& tour, const TspInstance& instance);
/// Closed-tour length of a visiting order.
double tour_length(const std::vector<std::size_t>& order, const TspInstance& instance);

/// H = L + (A/2) sum_m (1 - sum_j M_mj)^2 + (B/2) sum_j (1 - sum_m M_mj)^2
double tsp_energy(const TourMatrix& tour, const TspInstance& instance, double a, double b);

/// Row-swap proposals on tour matrices.
class TspModel {
public:
    using Config = TourMatrix;
    /// A = B = 2 * max distance unless given.
    explicit TspModel(TspInstance instance, std::optional<double> a = std::nullopt,
                      std::optional<double> b = std::nullopt);
    double energy(const Config& m) const { return tsp_energy(m, instance_, a_, b_); }
    Proposal<Config> propose(const Config& m, RandomStream& rng) const;
    bool is_valid(const Config& m) const { return m.size() == instance_.size() && m.is_permutation(); }
    std::size_t sweep_size() const { return instance_.size(); }
    /// All k! permutation matrices; only sensible for k <= 7.
    std::vector<Config> states() const;
    double proposal_probability(const Config& from, const Config& to) const;

    const TspInstance& instance() const { return instance_; }
    double multiplier_a() const { return a_; }
    double multiplier_b() const { return b_; }
    Config random_tour(RandomStream& rng) const;

private:
    TspInstance instance_;
    double a_;
    double b_;
};

/// Canonical form of a closed tour: starts at city 0, and of the two
/// directions the one whose second city is smaller.
std::vector<std::size_t> canonical_tour(std::vector<std::size_t> order);

struct BruteForceTour {
    std::vector<std::size_t> order;  ///< canonical
    double length;
    std::size_t distinct_tours;  ///< (k-1)!/2
};

/// Exhaustive search over all distinct closed tours.
BruteForceTour tsp_brute_force(const TspInstance& instance);

// ---------------------------------------------------------------------------
// k queens

/// Row, column and both diagonal constraints, plus exactly k queens.
bool kqueens_valid(const BinaryMatrix& board);

/// Queen of row i in column perm[i]; the energy counts pairs sharing a
/// diagonal. Proposals swap the columns of two rows.
class QueensModel {
public:
    using Config = std::vector<std::size_t>;
    explicit QueensModel(std::size_t k);
    double energy(const Config& perm) const;
    Proposal<Config> propose(const Config& perm, RandomStream& rng) const;
    bool is_valid(const Config& perm) const;
    std::size_t sweep_size() const { return k_; }
    Config random_configuration(RandomStream& rng) const;
    static BinaryMatrix board(const Config& perm);

private:
    std::size_t k_;
};

/// A valid eight-queens arrangement (column of the queen in each row).
std::vector<std::size_t> eight_queens_solution();

// ---------------------------------------------------------------------------
// Double digest

class DigestInstance {
public:
    /// Throws unless every list sums to `length` and all entries are positive.
    DigestInstance(std::vector<long> a, std::vector<long> b, std::vector<long> c, long length);
    const std::vector<long>& a() const { return a_; }
    const std::vector<long>& b() const { return b_; }
    /// Sorted in non-increasing order.
    const std::vector<long>& c() const { return c_; }
    long length() const { return length_; }

private:
    std::vector<long> a_, b_, c_;
    long length_;
};

/// Digest file: lines "a: ...", "b: ...", "c: ..." of integers and "L: value",
/// in any order.
DigestInstance read_digest(std::istream& in);
void write_digest(std::ostream& out, const DigestInstance& instance);
DigestInstance load_digest(const std::string& path);

/// The three example instances, L = 10000, 20000, 40000.
DigestInstance digest_instance(long length);

/// sigma and mu are index permutations of a and b.
struct DigestConfig {
    std::vector<std::size_t> sigma;
    std::vector<std::size_t> mu;
    friend bool operator==(const DigestConfig&, const DigestConfig&) = default;
    friend auto operator<=>(const DigestConfig&, const DigestConfig&) = default;
};

/// Double-digest fragments implied by placing a and b in the given orders:
/// merge both cut sets and take the gaps, sorted non-increasing.
std::vector<long> implied_fragments(const DigestInstance& instance, const DigestConfig& config);

/// H = sum_j [c_j - c^_j]^2 / c_j. If c^ has more fragments than c the extra
/// ones enter with weight 1; missing ones count as length zero.
double digest_energy(const DigestInstance& instance, const DigestConfig& config);

/// Proposals reverse a contiguous block of 2..max_block entries of sigma or
/// mu. Every move is an involution chosen with a fixed probability, so the
/// scheme is symmetric.
class DigestModel {
public:
    using Config = DigestConfig;
    explicit DigestModel(DigestInstance instance, std::size_t max_block = 3);
    double energy(const Config& c) const { return digest_energy(instance_, c); }
    Proposal<Config> propose(const Config& c, RandomStream& rng) const;
    bool is_valid(const Config& c) const;
    std::size_t sweep_size() const { return instance_.a().size() + instance_.b().size(); }
    std::vector<Config> states() const;
    double proposal_probability(const Config& from, const Config& to) const;
    Config random_configuration(RandomStream& rng) const;
    const DigestInstance& instance() const { return instance_; }

private:
    struct Move {
        bool on_sigma;
        std::size_t start;
        std::size_t length;
    };
    std::vector<Move> moves_;
    DigestInstance instance_;
    std::size_t max_block_;

    Config apply(const Config& c, const Move& m) const;
};

/// Ordering of fragment lengths (not indices), so permutations that only
/// exchange equal lengths coincide. Mirror images, reversing both orders,
/// are identified by taking the smaller of the two.
struct DigestOrdering {
    std::vector<long> a_order;
    std::vector<long> b_order;
    friend auto operator<=>(const DigestOrdering&, const DigestOrdering&) = default;
};

DigestOrdering canonical_ordering(const DigestInstance& instance, const DigestConfig& config);

/// All zero-energy orderings by exhaustive enumeration of n! m! pairs.
std::set<DigestOrdering> digest_solutions(const DigestInstance& instance);

}  // namespace neuro::anneal
