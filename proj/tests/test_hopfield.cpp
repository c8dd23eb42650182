#include "doctest.h"

#include <cmath>
#include <sstream>

#include "neuro/hopfield.hpp"

using namespace neuro;
using namespace neuro::hopfield;

namespace {

const std::vector<int> kXi1 = {1, -1, -1, 1};

PatternSet single_xi1() { return PatternSet::from_rows({kXi1}); }

Matrix outer_sum_oracle(const PatternSet& ps, bool zero_diag) {
    Matrix w(ps.n(), ps.n());
    for (std::size_t i = 0; i < ps.n(); ++i)
        for (std::size_t j = 0; j < ps.n(); ++j) {
            double s = 0.0;
            for (std::size_t mu = 0; mu < ps.p(); ++mu) s += ps(mu, i) * ps(mu, j);
            w(i, j) = (zero_diag && i == j) ? 0.0 : s / double(ps.n());
        }
    return w;
}

SpinState state_from_index(std::size_t code, std::size_t n) {
    SpinState s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = ((code >> i) & 1U) ? 1 : -1;
    return s;
}

}  // namespace

TEST_CASE("PatternSet validates entries and shape") {
    CHECK_THROWS_AS(PatternSet(1, 2, {1, 0}), Error);
    CHECK_THROWS_AS(PatternSet(0, 2, {}), Error);
    CHECK_THROWS_AS(PatternSet(2, 2, {1, 1, 1}), Error);
    CHECK_THROWS_AS(PatternSet::from_rows({{1, 1}, {1}}), Error);
    const auto ps = PatternSet::from_rows({{1, -1, 1}, {-1, -1, 1}});
    CHECK(ps.p() == 2);
    CHECK(ps.n() == 3);
    CHECK(ps.alpha() == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("pattern file round trip") {
    RandomStream rng(3);
    const auto ps = PatternSet::random(4, 9, rng);
    std::stringstream buf;
    write_patterns(buf, ps);
    CHECK(buf.str().substr(0, 4) == "4 9\n");
    CHECK(read_patterns(buf) == ps);
    std::stringstream bad("2 3\n1 1 1\n1 1");
    CHECK_THROWS_AS(read_patterns(bad), Error);
    std::stringstream wrong_value("1 2\n1 2\n");
    CHECK_THROWS_AS(read_patterns(wrong_value), Error);
}

TEST_CASE("hebb_weights examples") {
    SUBCASE("four-bit pattern, diagonal kept") {
        const auto net = hebb_weights(single_xi1(), DiagonalMode::kept);
        CHECK(net.weights()(0, 1) == -0.25);
        CHECK(net.weights()(0, 3) == 0.25);
        for (std::size_t i = 0; i < 4; ++i) CHECK(net.weights()(i, i) == 0.25);
        for (double t : net.thresholds()) CHECK(t == 0.0);
    }
    SUBCASE("all-ones pattern") {
        const auto net = hebb_weights(PatternSet::from_rows({{1, 1, 1}}), DiagonalMode::kept);
        for (double w : net.weights().data()) CHECK(w == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("random patterns match the outer-product oracle") {
        RandomStream rng(11);
        for (int rep = 0; rep < 20; ++rep) {
            const auto ps = PatternSet::random(2, 8, rng);
            CHECK(hebb_weights(ps, DiagonalMode::zeroed).weights() == outer_sum_oracle(ps, true));
            CHECK(hebb_weights(ps, DiagonalMode::kept).weights() == outer_sum_oracle(ps, false));
        }
    }
}

TEST_CASE("HopfieldNet rejects asymmetric weights and nonzero diagonal") {
    CHECK_THROWS_AS(HopfieldNet(Matrix{{0, 1}, {2, 0}}, Vector(2), DiagonalMode::kept), Error);
    CHECK_THROWS_AS(HopfieldNet(Matrix{{1, 0}, {0, 0}}, Vector(2), DiagonalMode::zeroed), Error);
    CHECK_THROWS_AS(HopfieldNet(Matrix{{0, 0}, {0, 0}}, Vector(3), DiagonalMode::kept), Error);
}

TEST_CASE("hebb_pseudoinverse") {
    SUBCASE("orthogonal patterns reproduce Hebb's rule") {
        const auto ps = PatternSet::from_rows({{1, 1, 1, 1}, {1, -1, 1, -1}, {1, 1, -1, -1}});
        const auto pinv = hebb_pseudoinverse(ps);
        const auto hebb = hebb_weights(ps, DiagonalMode::kept);
        CHECK(max_abs_diff(pinv.weights().data(), hebb.weights().data()) < 1e-14);
    }
    SUBCASE("single pattern") {
        const auto pinv = hebb_pseudoinverse(single_xi1());
        CHECK(max_abs_diff(pinv.weights().data(), hebb_weights(single_xi1(), DiagonalMode::kept).weights().data()) <
              1e-15);
    }
    SUBCASE("correlated patterns are exact eigenvectors") {
        RandomStream rng(5);
        for (int rep = 0; rep < 50; ++rep) {
            // correlate with a shared base pattern by copying most bits
            std::vector<std::vector<int>> rows(3, std::vector<int>(10));
            std::vector<int> base(10);
            for (auto& b : base) b = rng.spin();
            for (auto& r : rows)
                for (std::size_t i = 0; i < 10; ++i) r[i] = rng.bernoulli(0.7) ? base[i] : rng.spin();
            const auto ps = PatternSet::from_rows(rows);
            HopfieldNet* net = nullptr;
            std::optional<HopfieldNet> holder;
            try {
                holder.emplace(hebb_pseudoinverse(ps));
                net = &*holder;
            } catch (const SingularMatrixError&) {
                continue;
            }
            for (std::size_t nu = 0; nu < 3; ++nu) {
                Vector xi(ps.pattern(nu).begin(), ps.pattern(nu).end());
                const Vector wxi = net->weights() * xi;
                CHECK(max_abs_diff(wxi, xi) < 1e-10);
                CHECK(is_fixed_point(*net, ps.pattern(nu)));
            }
        }
    }
    SUBCASE("linearly dependent patterns are rejected") {
        const auto ps = PatternSet::from_rows({{1, -1, 1, 1}, {1, -1, 1, 1}});
        CHECK_THROWS_AS(hebb_pseudoinverse(ps), SingularMatrixError);
    }
}

TEST_CASE("hamming_distance") {
    const std::vector<int> a{1, -1, 1, 1}, b{1, 1, 1, -1};
    CHECK(hamming_distance(a, a) == 0);
    CHECK(hamming_distance(a, b) == 2);
    std::vector<int> neg(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) neg[i] = -a[i];
    CHECK(hamming_distance(a, neg) == 4);
    int quarter = 0;
    for (std::size_t i = 0; i < a.size(); ++i) quarter += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(hamming_distance(a, b) == std::size_t(quarter / 4));
    CHECK_THROWS_AS(hamming_distance(a, std::vector<int>{1}), Error);
}

TEST_CASE("deterministic updates") {
    const auto net = hebb_weights(single_xi1(), DiagonalMode::kept);
    RandomStream rng(0);
    SUBCASE("one synchronous step recovers the stored pattern") {
        CHECK(update_deterministic(net, {-1, -1, -1, 1}, UpdateMode::synchronous, rng) == kXi1);
    }
    SUBCASE("the inverted pattern attracts and stays") {
        SpinState s = update_deterministic(net, {-1, 1, -1, -1}, UpdateMode::synchronous, rng);
        const SpinState inv{-1, 1, 1, -1};
        CHECK(s == inv);
        for (int t = 0; t < 5; ++t) {
            s = update_deterministic(net, s, UpdateMode::synchronous, rng);
            CHECK(s == inv);
        }
    }
    SUBCASE("typewriter order updates neuron step mod N") {
        const SpinState s0{-1, -1, -1, 1};
        const auto s1 = update_deterministic(net, s0, UpdateMode::async_typewriter, rng, 4);
        CHECK(s1 == SpinState{1, -1, -1, 1});
        const auto s2 = update_deterministic(net, s0, UpdateMode::async_typewriter, rng, 1);
        CHECK(s2 == s0);
    }
    SUBCASE("sgn(0) = +1") {
        const HopfieldNet zero(Matrix(3, 3), Vector(3), DiagonalMode::zeroed);
        CHECK(update_deterministic(zero, {-1, -1, -1}, UpdateMode::synchronous, rng) == SpinState{1, 1, 1});
    }
    SUBCASE("relaxation reaches a fixed point") {
        const auto fixed = relax_deterministic(net, {-1, -1, -1, 1}, UpdateMode::async_random, rng);
        REQUIRE(fixed.has_value());
        CHECK(*fixed == kXi1);
    }
}

TEST_CASE("recognition and inversion symmetry") {
    RandomStream rng(21);
    for (int rep = 0; rep < 100; ++rep) {
        const auto ps = PatternSet::random(1, 3 + rng.uniform_index(30), rng);
        const auto net = hebb_weights(ps, DiagonalMode::zeroed);
        CHECK(is_fixed_point(net, ps.pattern(0)));
        SpinState neg(ps.n());
        for (std::size_t i = 0; i < ps.n(); ++i) neg[i] = -ps(0, i);
        CHECK(is_fixed_point(net, neg));
    }
    // fixed points of multi-pattern nets: -S* is fixed whenever S* is
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t n = 8;
        const auto ps = PatternSet::random(2, n, rng);
        const auto net = hebb_weights(ps, DiagonalMode::zeroed);
        for (std::size_t code = 0; code < (1U << n); ++code) {
            auto s = state_from_index(code, n);
            if (!is_fixed_point(net, s)) continue;
            // sgn(0)=+1 breaks the symmetry on exact ties, skip those
            bool tie = false;
            for (std::size_t i = 0; i < n; ++i) tie = tie || net.local_field(s, i) == 0.0;
            if (tie) continue;
            for (auto& v : s) v = -v;
            CHECK(is_fixed_point(net, s));
        }
    }
}

TEST_CASE("energy") {
    const auto net = hebb_weights(single_xi1(), DiagonalMode::kept);
    CHECK(energy(net, kXi1) == doctest::Approx(-2.0));
    const HopfieldNet zero(Matrix(4, 4), Vector(4), DiagonalMode::kept);
    CHECK(energy(zero, std::vector<int>{1, -1, 1, 1}) == 0.0);
    RandomStream rng(4);
    const auto ps = PatternSet::random(3, 12, rng);
    const auto h = hebb_weights(ps, DiagonalMode::zeroed);
    for (int rep = 0; rep < 50; ++rep) {
        auto s = state_from_index(rng.uniform_index(1U << 12), 12);
        const double e = energy(h, s);
        for (auto& v : s) v = -v;
        CHECK(energy(h, s) == doctest::Approx(e));
    }
    // threshold term
    const HopfieldNet biased(Matrix(2, 2), Vector{0.5, -1.0}, DiagonalMode::zeroed);
    CHECK(energy(biased, std::vector<int>{1, 1}) == doctest::Approx(-0.5));
}

TEST_CASE("asynchronous deterministic updates never increase the energy") {
    RandomStream rng(99);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 2 + rng.uniform_index(7);
        const auto ps = PatternSet::random(1 + rng.uniform_index(4), n, rng);
        const auto net = hebb_weights(ps, rep % 2 ? DiagonalMode::zeroed : DiagonalMode::kept);
        for (std::size_t code = 0; code < (1U << n); ++code) {
            const auto s = state_from_index(code, n);
            const double h0 = energy(net, s);
            for (std::size_t i = 0; i < n; ++i) {
                const auto s1 = update_deterministic(net, s, UpdateMode::async_typewriter, rng, i);
                CHECK(energy(net, s1) <= h0 + 1e-12);
            }
        }
    }
}

TEST_CASE("cross_talk") {
    SUBCASE("orthogonal patterns give zero") {
        const auto ps = PatternSet::from_rows({{1, 1, 1, 1}, {1, -1, 1, -1}, {1, 1, -1, -1}});
        // j != i exclusion leaves -xi_i^nu (1/N) sum_mu (xi^mu.xi^nu - xi_i^mu xi_i^nu) xi_i^mu
        for (std::size_t nu = 0; nu < 3; ++nu)
            for (std::size_t i = 0; i < 4; ++i) CHECK(cross_talk(ps, i, nu) == doctest::Approx(0.5));
    }
    SUBCASE("p = 1 gives zero") {
        const auto ps = single_xi1();
        for (std::size_t i = 0; i < 4; ++i) CHECK(cross_talk(ps, i, 0) == 0.0);
    }
    SUBCASE("matches brute-force triple sum") {
        RandomStream rng(8);
        for (int rep = 0; rep < 20; ++rep) {
            const auto ps = PatternSet::random(3, 6, rng);
            for (std::size_t nu = 0; nu < 3; ++nu)
                for (std::size_t i = 0; i < 6; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < 6; ++j)
                        for (std::size_t mu = 0; mu < 3; ++mu)
                            if (j != i && mu != nu) s += ps(mu, i) * ps(mu, j) * ps(nu, j);
                    CHECK(cross_talk(ps, i, nu) == doctest::Approx(-ps(nu, i) * s / 6.0));
                }
        }
    }
    SUBCASE("C > 1 exactly when the bit flips") {
        RandomStream rng(12);
        int flips = 0;
        for (int rep = 0; rep < 400; ++rep) {
            const auto ps = PatternSet::random(5, 10, rng);
            const auto net = hebb_weights(ps, DiagonalMode::zeroed);
            const std::size_t nu = rng.uniform_index(5), i = rng.uniform_index(10);
            const SpinState xi(ps.pattern(nu).begin(), ps.pattern(nu).end());
            const bool flipped = update_deterministic(net, xi, UpdateMode::async_typewriter, rng, i)[i] != xi[i];
            const double c = cross_talk(ps, i, nu);
            // b_i = xi_i (1 - 1/N) - xi_i C_i, ties resolve towards +1
            const double b = xi[i] * (1.0 - 1.0 / 10.0) - xi[i] * c;
            CHECK(flipped == (sgn(b) != xi[i]));
            flips += flipped;
        }
        CHECK(flips > 0);
    }
}

TEST_CASE("sampled cross-talk distribution is Gaussian with variance p/N") {
    RandomStream rng(2024);
    const std::size_t n = 1000, p = 100, draws = 40000;
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    for (std::size_t t = 0; t < draws; ++t) {
        const double c = sample_cross_talk(n, p, rng);
        s1 += c;
        s2 += c * c;
    }
    const double mean = s1 / draws;
    const double var = s2 / draws - mean * mean;
    CHECK(std::abs(var / (double(p) / n) - 1.0) < 0.05);
    CHECK(std::abs(mean) < 5.0 * std::sqrt(var / draws));
    RandomStream rng2(7);
    for (std::size_t t = 0; t < draws; ++t) {
        const double z = (sample_cross_talk(n, p, rng2) - mean) / std::sqrt(var);
        s3 += z * z * z;
        s4 += z * z * z * z;
    }
    CHECK(std::abs(s3 / draws) < 0.1);
    CHECK(std::abs(s4 / draws - 3.0) < 0.2);
}

TEST_CASE("sample_cross_talk agrees with the dense definition on small sizes") {
    // Same distribution, different generators: compare means of C^2 = (p-1)(N-1)/N^2.
    RandomStream rng(31);
    const std::size_t n = 70, p = 4;  // crosses a 64-bit word boundary
    double s2 = 0;
    const int draws = 200000;
    for (int t = 0; t < draws; ++t) {
        const double c = sample_cross_talk(n, p, rng);
        s2 += c * c;
    }
    const double expect = double(p - 1) * double(n - 1) / double(n * n);
    CHECK(std::abs(s2 / draws - expect) < 0.02 * expect);
}

TEST_CASE("one-step error Monte Carlo") {
    RandomStream rng(17);
    CHECK(one_step_error_mc(100, 1, 1000, rng).value == 0.0);
    const auto est = one_step_error_mc(500, 50, 40000, rng);
    CHECK(std::abs(est.value - p_error_formula(0.1)) < 3.0 * est.std_error + 1e-4);
    CHECK_THROWS_AS(one_step_error_mc(10, 2, 0, rng), Error);
}

TEST_CASE("p_error_formula") {
    CHECK(p_error_formula(1e-3) < 1e-100);
    CHECK(p_error_formula(0.185) == doctest::Approx(0.0100372427720045718).epsilon(1e-12));
    CHECK(p_error_formula(2.0) == doctest::Approx(0.239750061093476731).epsilon(1e-12));
    CHECK(p_error_formula(0.1) == doctest::Approx(0.000782701129001274839).epsilon(1e-12));
    CHECK_THROWS_AS(p_error_formula(0.0), Error);
}

TEST_CASE("mixed_state") {
    RandomStream rng(13);
    const auto ps = PatternSet::random(3, 12, rng);
    const std::size_t one[] = {0};
    const auto m1 = mixed_state(ps, one);
    CHECK(std::equal(m1.begin(), m1.end(), ps.pattern(0).begin()));
    const auto same = PatternSet::from_rows({kXi1, kXi1, kXi1});
    const std::size_t all3[] = {0, 1, 2};
    CHECK(mixed_state(same, all3) == kXi1);
    const std::size_t two[] = {0, 1};
    CHECK_THROWS_AS(mixed_state(ps, two), Error);
    const int signs[] = {1, -1, 1};
    const auto flipped = mixed_state(same, all3, signs);
    CHECK(flipped == kXi1);

    // <s_mu> = 1/2 over random triples
    double total = 0.0;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t) {
        const auto r = PatternSet::random(3, 12, rng);
        const auto mix = mixed_state(r, all3);
        for (std::size_t mu = 0; mu < 3; ++mu) total += overlap(mix, r.pattern(mu));
    }
    const double mean = total / (3.0 * trials);
    // each s_j^mu is +1 w.p. 3/4, so the per-bit variance is 3/4
    const double se = std::sqrt(0.75 / (3.0 * trials * 12.0));
    CHECK(std::abs(mean - 0.5) < 4.0 * se);
}

TEST_CASE("stochastic dynamics") {
    SUBCASE("probability function") {
        CHECK(stochastic_probability(0.0, 5.0) == 0.5);
        CHECK(stochastic_probability(INFINITY, 0.0) == 1.0);
        CHECK(stochastic_probability(INFINITY, -1e-9) == 0.0);
        CHECK(stochastic_probability(1.0, 1.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
    }
    SUBCASE("beta infinite matches deterministic asynchronous dynamics") {
        RandomStream gen(1);
        const auto ps = PatternSet::random(3, 40, gen);
        const auto net = hebb_weights(ps, DiagonalMode::zeroed);
        SpinState s0(40);
        for (auto& v : s0) v = gen.spin();
        RandomStream a(77), b(77);
        const auto run = update_stochastic(net, s0, INFINITY, a, ps.pattern(0), {.sweeps = 5, .transient = 0});
        SpinState det = s0;
        for (int k = 0; k < 5 * 40; ++k) {
            det = update_deterministic(net, det, UpdateMode::async_random, b);
            b.uniform();  // acceptance draw consumed by the stochastic rule
        }
        CHECK(run.state == det);
    }
    SUBCASE("beta zero randomises spins") {
        RandomStream rng(4);
        const auto ps = PatternSet::from_rows({std::vector<int>(200, 1)});
        const auto net = hebb_weights(ps, DiagonalMode::zeroed);
        const auto run = update_stochastic(net, SpinState(200, 1), 0.0, rng, ps.pattern(0), {.sweeps = 400, .transient = std::nullopt});
        CHECK(std::abs(run.trace.steady_mean) < 5.0 * std::sqrt(1.0 / 200.0 / 200.0));
    }
    SUBCASE("single spin in a fixed field has mean tanh(beta b)") {
        // neuron 0 sees field 0.3 from a clamped partner that never flips in the average
        const double beta = 1.3, b = 0.3;
        const HopfieldNet net(Matrix(1, 1), Vector{-b}, DiagonalMode::zeroed);
        RandomStream rng(5);
        const std::vector<int> ref{1};
        const auto run = update_stochastic(net, {1}, beta, rng, ref, {.sweeps = 200000, .transient = 0});
        const double expect = std::tanh(beta * b);
        const double se = std::sqrt((1.0 - expect * expect) / 200000.0);
        CHECK(std::abs(run.trace.steady_mean - expect) < 3.0 * se);
    }
    SUBCASE("running mean is the cumulative average") {
        RandomStream rng(6);
        const auto ps = PatternSet::random(1, 30, rng);
        const auto net = hebb_weights(ps, DiagonalMode::zeroed);
        const SpinState s0(ps.pattern(0).begin(), ps.pattern(0).end());
        const auto run = update_stochastic(net, s0, 1.5, rng, ps.pattern(0), {.sweeps = 50, .transient = std::nullopt});
        double acc = 0;
        for (std::size_t t = 0; t < 50; ++t) {
            acc += run.trace.instantaneous[t];
            CHECK(run.trace.running_mean[t] == doctest::Approx(acc / double(t + 1)));
        }
        CHECK(run.trace.transient == 25);
    }
    SUBCASE("rejects negative beta") {
        RandomStream rng(1);
        const auto ps = single_xi1();
        const auto net = hebb_weights(ps, DiagonalMode::zeroed);
        CHECK_THROWS_AS(update_stochastic(net, kXi1, -1.0, rng, kXi1), Error);
    }
}

TEST_CASE("steady-state overlap of a single stored pattern matches mean-field theory") {
    // m = tanh(2m), positive root
    const double m_star = 0.957504024077268740676501530502;
    RandomStream rng(2);
    const auto ps = PatternSet::random(1, 500, rng);
    const auto net = hebb_weights(ps, DiagonalMode::kept);
    const SpinState s0(ps.pattern(0).begin(), ps.pattern(0).end());
    const auto run = update_stochastic(net, s0, 2.0, rng, ps.pattern(0), {.sweeps = 10000, .transient = std::nullopt});
    CAPTURE(run.trace.steady_mean);
    CAPTURE(run.trace.steady_stderr);
    CHECK(run.trace.steady_stderr > 0.0);
    CHECK(std::abs(run.trace.steady_mean - m_star) < 3.0 * run.trace.steady_stderr);
}

TEST_CASE("diluted Hebb weights keep K connections per neuron") {
    RandomStream rng(9);
    const auto ps = PatternSet::random(2, 20, rng);
    const Matrix w = diluted_hebb_weights(ps, 5, rng);
    for (std::size_t i = 0; i < 20; ++i) {
        std::size_t nonzero_or_picked = 0;
        CHECK(w(i, i) == 0.0);
        for (std::size_t j = 0; j < 20; ++j) nonzero_or_picked += w(i, j) != 0.0;
        CHECK(nonzero_or_picked <= 5);
    }
    CHECK_THROWS_AS(diluted_hebb_weights(ps, 20, rng), Error);
}
