#include "doctest.h"

#include <cmath>

#include "neuro/meanfield.hpp"
#include "neuro/numerics.hpp"

using namespace neuro;
using namespace neuro::meanfield;

// Reference values below come from 30-digit evaluations (adaptive quadrature and
// root polishing) of the same equations.

TEST_CASE("solve_m1") {
    CHECK(solve_m1(0.0) == 0.0);
    CHECK(solve_m1(0.5) == 0.0);
    CHECK(solve_m1(1.0) == 0.0);
    CHECK(solve_m1(2.0) == doctest::Approx(0.957504024077268740676501530502).epsilon(1e-14));
    CHECK(std::abs(solve_m1(2.0) - 0.957504024077268740676501530502) < 1e-10);
    CHECK(solve_m1(INFINITY) == 1.0);
    CHECK(solve_m1(1e6) == doctest::Approx(1.0));
    CHECK_THROWS_AS(solve_m1(-1.0), Error);
}

TEST_CASE("solve_m1 residual and monotonicity on a log grid") {
    double prev = 0.0;
    for (double lb = -3.0; lb <= 3.0; lb += 0.01) {
        const double beta = std::pow(10.0, lb);
        const double m = solve_m1(beta);
        CAPTURE(beta);
        CHECK(std::abs(m - std::tanh(beta * m)) < 1e-12);
        CHECK(m >= prev);
        CHECK((m > 0.0) == (beta > 1.0));
        prev = m;
    }
}

TEST_CASE("nonzero scalar solution exists iff beta > 1") {
    for (double beta : {0.5, 0.9, 1.0, 1.1, 2.0, 5.0}) CHECK((solve_m1(beta) > 0.0) == (beta > 1.0));
}

TEST_CASE("gaussian averages: substituted quadrature agrees with Gauss-Hermite at moderate beta") {
    for (double m1 : {0.0, 0.3, 0.9})
        for (double sigma : {0.05, 0.1, 0.2})
            for (double beta : {0.5, 1.0, 2.0}) {
                const auto a = gaussian_averages(m1, sigma, beta);
                const auto b = gaussian_averages_hermite(m1, sigma, beta);
                CAPTURE(m1);
                CAPTURE(sigma);
                CAPTURE(beta);
                CHECK(std::abs(a.m - b.m) < 1e-12);
                CHECK(std::abs(a.q - b.q) < 1e-12);
                CHECK(std::abs(a.c - b.c) < 1e-12);
            }
    // beyond beta * sigma ~ 1 Gauss-Hermite loses digits; the substituted rule does not
    const auto a = gaussian_averages(0.3, 0.6, 2.0);
    CHECK(std::abs(a.c - 0.991054433057510296365170279365) < 1e-13);
}

TEST_CASE("gaussian averages stay accurate at large beta") {
    // beta -> infinity: m -> erf(m1 / (sqrt2 sigma)), c -> sqrt(2/pi)/sigma exp(-m1^2/2sigma^2)
    const double m1 = 0.9, sigma = 0.35, beta = 1e6;
    const auto a = gaussian_averages(m1, sigma, beta);
    CHECK(a.m == doctest::Approx(neuro::erf(m1 / (std::sqrt(2.0) * sigma))).epsilon(1e-9));
    const double c_limit = std::sqrt(2.0 / M_PI) / sigma * std::exp(-m1 * m1 / (2 * sigma * sigma));
    CHECK(a.c == doctest::Approx(c_limit).epsilon(1e-6));
    const auto z = gaussian_averages(0.4, 0.0, 3.0);
    CHECK(z.m == doctest::Approx(std::tanh(1.2)));
}

TEST_CASE("solve_coupled examples") {
    SUBCASE("small alpha decouples to the scalar equation") {
        const auto s = solve_coupled(1e-9, 2.0);
        CHECK(s.converged);
        CHECK(std::abs(s.m1 - solve_m1(2.0)) < 1e-6);
    }
    SUBCASE("beta below one gives the m1 = 0 branch") {
        for (double alpha : {0.01, 0.05, 0.2}) {
            const auto s = solve_coupled(alpha, 0.8);
            CHECK(s.converged);
            CHECK(s.m1 == 0.0);
        }
    }
    SUBCASE("reference solutions") {
        struct Ref {
            double alpha, beta, m1, q;
        };
        const Ref refs[] = {
            {0.05, 20.0, 0.999987906141692468689505649543, 0.99998791140034859559645783322},
            {0.05, 2.0, 0.904106075270309487575286324529, 0.833357963967017567623177719561},
            {0.1, 5.0, 0.989085155044085962392053023128, 0.984417060281526440083877319955},
        };
        for (const auto& r : refs) {
            CAPTURE(r.alpha);
            CAPTURE(r.beta);
            const auto s = solve_coupled(r.alpha, r.beta);
            REQUIRE(s.converged);
            CHECK(s.residual < 1e-10);
            CHECK(std::abs(s.m1 - r.m1) < 1e-6);
            CHECK(std::abs(s.q - r.q) < 1e-6);
            CHECK(s.m1 >= 0.0);
            CHECK(s.m1 <= 1.0);
        }
    }
    SUBCASE("converged solutions satisfy all three equations") {
        for (double alpha : {0.02, 0.08})
            for (double beta : {1.5, 4.0, 50.0}) {
                const auto s = solve_coupled(alpha, beta);
                REQUIRE(s.converged);
                const auto avg = gaussian_averages(s.m1, s.sigma_z, beta);
                CHECK(std::abs(avg.m - s.m1) < 1e-9);
                CHECK(std::abs(avg.q - s.q) < 1e-9);
                const double c = beta * (1.0 - s.q);
                CHECK(s.sigma_z * s.sigma_z ==
                      doctest::Approx(alpha * s.q / ((1 - c) * (1 - c))).epsilon(1e-6));
            }
    }
    SUBCASE("invalid arguments") {
        CHECK_THROWS_AS(solve_coupled(0.0, 1.0), Error);
        CHECK_THROWS_AS(solve_coupled(0.1, 0.0), Error);
    }
}

TEST_CASE("q approaches one with finite beta(1-q) as beta grows") {
    double prev_q = 0.0;
    for (double beta : {10.0, 100.0, 1000.0, 10000.0}) {
        const auto s = solve_coupled(0.05, beta);
        REQUIRE(s.converged);
        CHECK(s.q > prev_q);
        const double c = beta * (1.0 - s.q);
        CHECK(c > 0.0);
        CHECK(c < 1.0);
        prev_q = s.q;
    }
    CHECK(prev_q > 0.9999);
}

TEST_CASE("large-beta coupled solution agrees with the deterministic limit") {
    for (double alpha : {0.05, 0.10, 0.13}) {
        const auto s = solve_coupled(alpha, 1e3);
        REQUIRE(s.converged);
        CHECK(std::abs(s.m1 - solve_deterministic(alpha).m1) < 1e-3);
    }
}

TEST_CASE("solve_deterministic") {
    SUBCASE("reference roots of the y-equation") {
        struct Ref {
            double alpha, y, m1, p;
        };
        const Ref refs[] = {
            {0.05, 3.161739139993558135215, 0.9999922281490462363268, 3.885925476881836597e-6},
            {0.1, 2.185047196617601208238, 0.9979992663472991562833, 0.001000366826350421858339},
            {0.13, 1.760424528312593838830, 0.9872118907992346584116, 0.006394054600382670794165},
        };
        for (const auto& r : refs) {
            const auto s = solve_deterministic(r.alpha);
            CHECK(std::abs(s.y - r.y) < 1e-9);
            CHECK(std::abs(s.m1 - r.m1) < 1e-8);
            CHECK(std::abs(s.p_error - r.p) < 1e-8);
            CHECK(s.p_error == doctest::Approx(r.p).epsilon(1e-9));
        }
    }
    SUBCASE("above the critical capacity the network is noise") {
        const auto s = solve_deterministic(0.2);
        CHECK(s.m1 == 0.0);
        CHECK(s.p_error == 0.5);
    }
    SUBCASE("small alpha reduces to the one-step error probability") {
        for (double alpha : {1e-3, 5e-3, 0.01}) {
            const double one_step = 0.5 * neuro::erfc(1.0 / std::sqrt(2.0 * alpha));
            CHECK(std::abs(solve_deterministic(alpha).p_error / one_step - 1.0) < 0.02);
        }
    }
    SUBCASE("m1 is non-increasing in alpha") {
        double prev = 1.0;
        const double ac = critical_capacity();
        for (double alpha = 1e-3; alpha < ac; alpha += 1e-3) {
            const double m = solve_deterministic(alpha).m1;
            CHECK(m <= prev);
            prev = m;
        }
    }
}

TEST_CASE("critical capacity") {
    const double ac = critical_capacity();
    CHECK(std::abs(ac - 0.1379055664949317378) < 1e-12);
    CHECK(ac >= 0.1374);
    CHECK(ac <= 0.1384);
    CHECK(ac < 0.138187);
    CHECK(solve_deterministic(0.10).m1 > 0.0);
    CHECK(solve_deterministic(0.20).m1 == 0.0);
    CHECK(solve_deterministic(ac * (1 - 1e-9)).m1 > 0.5);
    CHECK(solve_deterministic(ac * (1 + 1e-9)).m1 == 0.0);
}

TEST_CASE("phase boundary") {
    const double grid[] = {1.0, 0.5, 0.2, 0.05};
    const auto pts = phase_boundary_scan(grid);
    REQUIRE(pts.size() == 4);
    CHECK(pts[0].alpha == 0.0);
    CHECK(pts[0].retrieval == Retrieval::disordered);
    for (std::size_t k = 1; k < pts.size(); ++k) {
        CHECK(pts[k].retrieval == Retrieval::ordered);
        CHECK(pts[k].alpha > pts[k - 1].alpha);  // boundary falls as noise grows
        CHECK(pts[k].alpha < 0.1384);
    }
    // bracket the boundary at beta_inv = 0.5 by direct evaluation on either side
    const double a = pts[1].alpha;
    CHECK(solve_coupled(a - 1e-3, 2.0).m1 > 1e-3);
    CHECK(solve_coupled(a + 1e-3, 2.0).m1 <= 1e-3);
    CHECK(std::abs(critical_alpha(1e3, 1e-5) - 0.1379) < 5e-4);
    const double bad[] = {1.5};
    CHECK_THROWS_AS(phase_boundary_scan(bad), Error);
}

TEST_CASE("symmetric mixed state") {
    CHECK(solve_mixed_symmetric(0.8) == 0.0);
    CHECK(solve_mixed_symmetric(1.0) == 0.0);
    const double m = solve_mixed_symmetric(1.5);
    CHECK(std::abs(m - 0.3497039688351603657950445) < 1e-12);
    CHECK(std::abs(m - 0.25 * (std::tanh(4.5 * m) + std::tanh(1.5 * m))) < 1e-14);
    CHECK(solve_mixed_symmetric(1.01) > 0.0);
    CHECK(solve_mixed_symmetric(100.0) == doctest::Approx(0.5));
}
