#include "doctest.h"

#include <cmath>
#include <numeric>
#include <sstream>

#include "neuro/anneal.hpp"

using namespace neuro::anneal;
using neuro::Error;
using neuro::Matrix;
using neuro::RandomStream;
using neuro::Vector;
namespace hopfield = neuro::hopfield;

namespace {

// Positions 0..n-1 with a convex energy; proposals step left or right and
// stay put at the walls.
struct ConvexChain {
    using Config = int;
    int n = 21;
    int centre = 13;
    double energy(int x) const { return double((x - centre) * (x - centre)); }
    Proposal<int> propose(int x, RandomStream& rng) const {
        const int y = std::clamp(x + (rng.bernoulli(0.5) ? 1 : -1), 0, n - 1);
        return {y, energy(y) - energy(x)};
    }
    bool is_valid(int x) const { return x >= 0 && x < n; }
    std::size_t sweep_size() const { return 1; }
};
static_assert(EnergyModel<ConvexChain>);
static_assert(EnumerableModel<TwoLevelModel>);
static_assert(EnumerableModel<SpinFlipModel>);
static_assert(EnumerableModel<TspModel>);
static_assert(EnumerableModel<DigestModel>);
static_assert(EnergyModel<QueensModel>);

hopfield::HopfieldNet random_spin_net(std::size_t n, RandomStream& rng, bool thresholds) {
    Matrix w(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) w(i, j) = w(j, i) = rng.gaussian();
    Vector theta(n, 0.0);
    if (thresholds)
        for (auto& t : theta) t = rng.gaussian(0.0, 0.5);
    return hopfield::HopfieldNet(std::move(w), std::move(theta), hopfield::DiagonalMode::zeroed);
}

}  // namespace

TEST_CASE("acceptance probabilities") {
    for (double beta : {0.0, 0.3, 1.0, 7.0, double(INFINITY)}) {
        CHECK(acceptance_probability(Kernel::metropolis, beta, -1.0) == 1.0);
        for (double d = -5.0; d <= 5.0; d += 0.25)
            CHECK(acceptance_probability(Kernel::metropolis, beta, d) >=
                  acceptance_probability(Kernel::glauber, beta, d));
    }
    CHECK(acceptance_probability(Kernel::metropolis, 0.0, 10.0) == 1.0);
    CHECK(acceptance_probability(Kernel::glauber, 2.0, 0.0) == 0.5);
    CHECK(acceptance_probability(Kernel::glauber, INFINITY, -1e-3) == 1.0);
    CHECK(acceptance_probability(Kernel::glauber, 1e4, -1.0) == doctest::Approx(1.0));
    CHECK(acceptance_probability(Kernel::glauber, 1.0, 1000.0) >= 0.0);
    CHECK(acceptance_probability(Kernel::metropolis, 1.0, 1.0) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("Metropolis acceptance rate for an uphill move") {
    const TwoLevelModel model(0.0, 1.0);
    RandomStream rng(1);
    const int trials = 100000;
    int accepted = 0;
    for (int t = 0; t < trials; ++t) accepted += metropolis_step(model, 0, 1.0, rng).second;
    const double p = std::exp(-1.0);
    CHECK(std::abs(double(accepted) / trials - p) < 3.0 * std::sqrt(p * (1 - p) / trials));
    // downhill and infinite temperature always accepted
    for (int t = 0; t < 100; ++t) {
        CHECK(metropolis_step(model, 1, 5.0, rng).second);
        CHECK(metropolis_step(model, 0, 0.0, rng).second);
    }
}

TEST_CASE("Glauber dynamics samples the two-level Boltzmann occupancy") {
    const TwoLevelModel model(0.0, 1.0);
    RandomStream rng(2);
    int state = 0;
    long occupied = 0;
    const long steps = 400000;
    for (long t = 0; t < steps; ++t) {
        state = glauber_step(model, state, 1.0, rng);
        occupied += state;
    }
    const double expect = 0.268941421369995120748840758178;
    // successive states are correlated; the chain's integrated autocorrelation
    // time for this kernel is (1 + lambda)/(1 - lambda) with lambda = 1 - p01 - p10
    const double p01 = 1.0 / (1.0 + std::exp(1.0)), p10 = 1.0 / (1.0 + std::exp(-1.0));
    const double lambda = 1.0 - p01 - p10;
    const double tau = (1 + lambda) / (1 - lambda);
    const double se = std::sqrt(expect * (1 - expect) * tau / steps);
    CHECK(std::abs(double(occupied) / steps - expect) < 3.0 * se);
}

TEST_CASE("detailed balance examples") {
    SUBCASE("two-level Metropolis closed form") {
        const TwoLevelModel model(0.0, 1.0);
        CHECK(detailed_balance_check(model, Kernel::metropolis, 1.0, 0, 1) < 1e-15);
    }
    SUBCASE("equal energies give zero residual") {
        const TwoLevelModel model(0.4, 0.4);
        CHECK(detailed_balance_check(model, Kernel::glauber, 3.0, 0, 1) == 0.0);
    }
    SUBCASE("three-spin Hopfield energy, Glauber, all pairs") {
        RandomStream rng(3);
        const auto ps = hopfield::PatternSet::random(2, 3, rng);
        const SpinFlipModel model(hopfield::hebb_weights(ps, hopfield::DiagonalMode::zeroed));
        double worst = 0.0;
        std::size_t pairs = 0;
        for (std::size_t l = 0; l < 8; ++l)
            for (std::size_t k = l + 1; k < 8; ++k) {
                worst = std::max(worst, detailed_balance_check(model, Kernel::glauber, 0.7, l, k));
                ++pairs;
            }
        CHECK(pairs == 28);
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("both kernels leave the Boltzmann distribution stationary") {
    RandomStream rng(4);
    for (double beta : {0.5, 1.0, 2.0})
        for (Kernel kernel : {Kernel::metropolis, Kernel::glauber}) {
            CAPTURE(beta);
            for (int rep = 0; rep < 10; ++rep) {
                const SpinFlipModel spins(random_spin_net(3, rng, rep % 2 == 1));
                const auto r = check_balance(spins, kernel, beta);
                CHECK(r.states == 8);
                CHECK(r.detailed_balance < 1e-12);
                CHECK(r.stationarity < 1e-12);
                CHECK(r.row_sum < 1e-12);
            }
            std::vector<City> cities;
            for (int i = 0; i < 3; ++i) cities.push_back({rng.uniform(), rng.uniform()});
            const auto tsp = check_balance(TspModel(TspInstance(cities)), kernel, beta);
            CHECK(tsp.states == 6);
            CHECK(tsp.detailed_balance < 1e-12);
            CHECK(tsp.stationarity < 1e-12);
            const DigestModel digest(DigestInstance({3, 2, 5}, {6, 4}, {3, 2, 1, 4}, 10), 3);
            const auto d = check_balance(digest, kernel, beta);
            CHECK(d.states == 12);
            CHECK(d.detailed_balance < 1e-12);
            CHECK(d.stationarity < 1e-12);
        }
}

TEST_CASE("proposal schemes are symmetric") {
    const DigestModel digest(DigestInstance({3, 2, 5}, {6, 4}, {3, 2, 1, 4}, 10), 3);
    const auto ds = digest.states();
    for (const auto& a : ds)
        for (const auto& b : ds) CHECK(digest.proposal_probability(a, b) == digest.proposal_probability(b, a));
    std::vector<City> cities{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const TspModel tsp{TspInstance(cities)};
    const auto ts = tsp.states();
    CHECK(ts.size() == 24);
    for (const auto& a : ts) {
        double total = 0.0;
        for (const auto& b : ts) {
            CHECK(tsp.proposal_probability(a, b) == tsp.proposal_probability(b, a));
            total += tsp.proposal_probability(a, b);
        }
        CHECK(total == doctest::Approx(1.0));
    }
}

TEST_CASE("proposed energy differences are exact") {
    RandomStream rng(5);
    const TspModel tsp(seven_city_instance());
    auto tour = tsp.random_tour(rng);
    const QueensModel queens(8);
    auto perm = queens.random_configuration(rng);
    const DigestModel digest(digest_instance(10000));
    auto dc = digest.random_configuration(rng);
    const SpinFlipModel spins(random_spin_net(6, rng, true));
    std::vector<int> s(6, 1);
    for (int t = 0; t < 500; ++t) {
        auto p1 = tsp.propose(tour, rng);
        CHECK(std::abs(p1.delta - (tsp.energy(p1.candidate) - tsp.energy(tour))) < 1e-9);
        tour = p1.candidate;
        auto p2 = queens.propose(perm, rng);
        CHECK(std::abs(p2.delta - (queens.energy(p2.candidate) - queens.energy(perm))) < 1e-9);
        perm = p2.candidate;
        auto p3 = digest.propose(dc, rng);
        CHECK(std::abs(p3.delta - (digest.energy(p3.candidate) - digest.energy(dc))) < 1e-9);
        dc = p3.candidate;
        auto p4 = spins.propose(s, rng);
        CHECK(std::abs(p4.delta - (spins.energy(p4.candidate) - spins.energy(s))) < 1e-9);
        s = p4.candidate;
    }
}

TEST_CASE("tsp energy") {
    const auto inst = seven_city_instance();
    SUBCASE("valid tours have H = L") {
        RandomStream rng(6);
        const TspModel model(inst);
        for (int t = 0; t < 20; ++t) {
            const auto tour = model.random_tour(rng);
            CHECK(model.energy(tour) == doctest::Approx(tour_length(tour.order(), inst)).epsilon(1e-14));
            CHECK(tsp_path_length(tour, inst) == doctest::Approx(tour_length(tour.order(), inst)).epsilon(1e-14));
        }
    }
    SUBCASE("empty matrix violates every constraint once") {
        const TspInstance three({{0, 0}, {1, 0}, {0, 1}});
        CHECK(tsp_energy(BinaryMatrix(3), three, 2.0, 2.0) == 6.0);
    }
    SUBCASE("tour (a) is shorter than tour (b)") {
        // A B C D E F G = 0..6
        const std::vector<std::size_t> a{0, 3, 1, 6, 5, 2, 4};  // A-D-B-G-F-C-E
        const std::vector<std::size_t> b{0, 3, 6, 5, 2, 4, 1};  // A-D-G-F-C-E-B
        CHECK(tour_length(a, inst) < tour_length(b, inst));
        const auto best = tsp_brute_force(inst);
        CHECK(best.distinct_tours == 360);
        CHECK(best.order == canonical_tour(a));
        CHECK(best.length == doctest::Approx(tour_length(a, inst)));
    }
    SUBCASE("rotation and reversal leave the length unchanged") {
        std::vector<std::size_t> order{0, 3, 1, 6, 5, 2, 4};
        const double l = tour_length(order, inst);
        for (int r = 0; r < 7; ++r) {
            std::rotate(order.begin(), order.begin() + 1, order.end());
            CHECK(tsp_energy(BinaryMatrix::from_order(order), inst, 1, 1) == doctest::Approx(l));
            auto rev = order;
            std::reverse(rev.begin(), rev.end());
            CHECK(tsp_energy(BinaryMatrix::from_order(rev), inst, 1, 1) == doctest::Approx(l));
            CHECK(canonical_tour(rev) == canonical_tour(order));
        }
    }
    SUBCASE("invalid multipliers") { CHECK_THROWS_AS(tsp_energy(BinaryMatrix(7), inst, 0.0, 1.0), Error); }
}

TEST_CASE("TSP file round trip") {
    std::stringstream buf;
    write_tsp(buf, seven_city_instance());
    const auto back = read_tsp(buf);
    REQUIRE(back.size() == 7);
    CHECK(back.cities()[5].x == 0.8);
    CHECK(back.distance(0, 3) == seven_city_instance().distance(0, 3));
    std::stringstream bad("3\n0 0\n1 1\n");
    CHECK_THROWS_AS(read_tsp(bad), Error);
}

TEST_CASE("k-queens") {
    BinaryMatrix one(1);
    one.set(0, 0, 1);
    CHECK(kqueens_valid(one));
    BinaryMatrix diag(2);
    diag.set(0, 0, 1);
    diag.set(1, 1, 1);
    CHECK_FALSE(kqueens_valid(diag));
    const auto sol = eight_queens_solution();
    CHECK(kqueens_valid(QueensModel::board(sol)));
    const QueensModel model(8);
    CHECK(model.energy(sol) == 0.0);
    CHECK(model.is_valid(sol));
    BinaryMatrix seven = QueensModel::board(sol);
    seven.set(0, 0, 0);
    CHECK_FALSE(kqueens_valid(seven));

    RandomStream rng(7);
    for (int rep = 0; rep < 5; ++rep) {
        const auto r = anneal(model, model.random_configuration(rng), {.beta0 = 0.5, .multiplier = 1.2, .sweeps_per_stage = 200, .stages = 30},
                              rng, {.kernel = Kernel::metropolis, .target_energy = 0.0});
        CHECK(r.best_energy == 0.0);
        CHECK(kqueens_valid(QueensModel::board(r.best)));
    }
}

TEST_CASE("digest energy") {
    SUBCASE("toy instance") {
        const DigestInstance inst({6, 4}, {7, 3}, {6, 1, 3}, 10);
        const DigestConfig id{{0, 1}, {0, 1}};
        CHECK(implied_fragments(inst, id) == std::vector<long>{6, 3, 1});
        CHECK(digest_energy(inst, id) == 0.0);
        // cuts {4} and {7}: gaps 4, 3, 3 against 6, 3, 1
        CHECK(digest_energy(inst, {{1, 0}, {0, 1}}) == doctest::Approx(4.0 / 6.0 + 4.0));
    }
    SUBCASE("coincident cuts merge and missing fragments count as zero") {
        const DigestInstance inst({5, 5}, {5, 5}, {5, 5}, 10);
        CHECK(digest_energy(inst, {{0, 1}, {0, 1}}) == 0.0);
        const DigestInstance inst2({5, 5}, {4, 6}, {5, 5}, 10);
        // gaps 5,4,1 vs 5,5: (5-5)^2/5 + (5-4)^2/5 + 1^2
        CHECK(digest_energy(inst2, {{0, 1}, {0, 1}}) == doctest::Approx(0.2 + 1.0));
    }
    SUBCASE("ground truth ordering of the L = 10000 instance") {
        const auto inst = digest_instance(10000);
        const auto sols = digest_solutions(inst);
        REQUIRE(!sols.empty());
        RandomStream rng(8);
        const DigestModel model(inst);
        int positive = 0;
        for (int t = 0; t < 50; ++t) positive += model.energy(model.random_configuration(rng)) > 0.0;
        CHECK(positive > 40);
    }
    SUBCASE("mirror symmetry") {
        const auto inst = digest_instance(10000);
        const DigestModel model(inst);
        RandomStream rng(9);
        for (int t = 0; t < 100; ++t) {
            auto c = model.random_configuration(rng);
            const double h = model.energy(c);
            std::reverse(c.sigma.begin(), c.sigma.end());
            std::reverse(c.mu.begin(), c.mu.end());
            CHECK(model.energy(c) == doctest::Approx(h));
        }
    }
    SUBCASE("instance validation") {
        CHECK_THROWS_AS(DigestInstance({5, 4}, {9}, {9}, 10), Error);
        CHECK_THROWS_AS(DigestInstance({10, 0}, {10}, {10}, 10), Error);
        CHECK_NOTHROW(digest_instance(20000));
        CHECK_NOTHROW(digest_instance(40000));
        CHECK_THROWS_AS(digest_instance(123), Error);
    }
}

TEST_CASE("digest file round trip") {
    std::stringstream buf;
    write_digest(buf, digest_instance(10000));
    const auto back = read_digest(buf);
    CHECK(back.a() == digest_instance(10000).a());
    CHECK(back.c() == digest_instance(10000).c());
    CHECK(back.length() == 10000);
    std::stringstream listed("L: 10\nc: [6, 1, 3]\na: 6 4\nb: 7 3\n");
    CHECK(read_digest(listed).c() == std::vector<long>{6, 3, 1});
    std::stringstream missing("a: 6 4\nb: 7 3\n");
    CHECK_THROWS_AS(read_digest(missing), Error);
}

TEST_CASE("annealing") {
    SUBCASE("zero temperature descends greedily to the minimum") {
        const ConvexChain chain;
        RandomStream rng(10);
        const auto r = anneal(chain, 0, {.beta0 = INFINITY, .multiplier = 1.0, .sweeps_per_stage = 500, .stages = 1}, rng);
        CHECK(r.best == 13);
        CHECK(r.best_energy == 0.0);
        CHECK(r.stage_mean_energy.size() == 1);
    }
    SUBCASE("seven-city tour matches exhaustive search") {
        const TspModel model(seven_city_instance());
        const auto oracle = tsp_brute_force(model.instance());
        RandomStream rng(11);
        for (int run = 0; run < 3; ++run) {
            double best = INFINITY;
            std::vector<std::size_t> order;
            for (int restart = 0; restart < 20; ++restart) {
                const auto r = anneal(model, model.random_tour(rng), {.beta0 = 0.5, .multiplier = 1.1, .sweeps_per_stage = 100, .stages = 50}, rng);
                if (r.best_energy < best) {
                    best = r.best_energy;
                    order = r.best.order();
                }
            }
            CHECK(canonical_tour(order) == oracle.order);
            CHECK(best == doctest::Approx(oracle.length));
        }
    }
    SUBCASE("digest restarts recover every solution") {
        const auto inst = digest_instance(10000);
        const DigestModel model(inst);
        const auto exact = digest_solutions(inst);
        std::set<DigestOrdering> found;
        RandomStream rng(12);
        CHECK(exact.size() == 12);
        for (int restart = 0; restart < 300; ++restart) {
            // digest energies are O(10^3), so the chain starts much hotter than for tours
            const auto r = anneal(model, model.random_configuration(rng), {.beta0 = 1e-3}, rng, {.target_energy = 0.0});
            if (r.best_energy == 0.0) found.insert(canonical_ordering(inst, r.best));
        }
        CHECK(found == exact);
    }
    SUBCASE("stage means fall as beta grows") {
        const TspModel model(seven_city_instance());
        RandomStream rng(13);
        const auto r = anneal(model, model.random_tour(rng), {.beta0 = 0.1, .multiplier = 2.0, .sweeps_per_stage = 200, .stages = 8}, rng);
        CHECK(r.stage_mean_energy.size() == 8);
        CHECK(r.stage_mean_energy.back() < r.stage_mean_energy.front());
    }
    SUBCASE("rejects an empty schedule") {
        RandomStream rng(1);
        CHECK_THROWS_AS(anneal(ConvexChain{}, 0, {.stages = 0}, rng), Error);
    }
}
