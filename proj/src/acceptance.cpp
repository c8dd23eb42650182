#include "neuro/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "neuro/anneal.hpp"
#include "neuro/hopfield.hpp"
#include "neuro/meanfield.hpp"
#include "neuro/numerics.hpp"
#include "neuro/protocols.hpp"
#include "neuro/rbf.hpp"
#include "neuro/unsupervised.hpp"

namespace neuro::acceptance {

namespace {

std::string printf_string(const char* fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

CriterionResult one_step_error(std::uint64_t seed) {
    Timer t;
    RandomStream rng(seed);
    const Estimate e = hopfield::one_step_error_mc(1000, 185, 100000, rng);
    const double exact = hopfield::p_error_formula(0.185);
    const double secs = t.seconds();
    const bool within = std::abs(e.value - exact) < 3.0 * e.std_error;
    return {1, "one-step error probability at N=1000, p=185", within && secs < 60.0, false,
            printf_string("P_mc=%.5f +- %.5f, formula=%.5f, limit 60 s", e.value, e.std_error, exact), secs};
}

CriterionResult capacity() {
    Timer t;
    const double a = meanfield::critical_capacity();
    const double secs = t.seconds();
    const bool ok = a >= 0.1374 && a <= 0.1384 && a < 0.138187 && secs < 5.0;
    return {2, "critical capacity", ok, false, printf_string("alpha_c=%.6f in [0.1374, 0.1384], < 0.138187", a), secs};
}

CriterionResult scalar_mean_field() {
    Timer t;
    bool ok = true;
    std::string detail;
    for (double beta : {0.5, 0.9, 1.0, 1.1, 2.0, 5.0}) {
        const double m = meanfield::solve_m1(beta);
        const bool nonzero = m > 1e-8;
        ok = ok && nonzero == (beta > 1.0);
        detail += printf_string("m(%.1f)=%.4f ", beta, m);
    }
    // Newton on m - tanh(2m) from m = 1.
    double m = 1.0;
    for (int i = 0; i < 100; ++i) {
        const double th = std::tanh(2.0 * m);
        m -= (m - th) / (1.0 - 2.0 * (1.0 - th * th));
    }
    const double diff = std::abs(meanfield::solve_m1(2.0) - m);
    ok = ok && diff < 1e-10;
    detail += printf_string("|m(2)-newton|=%.1e", diff);
    return {3, "scalar mean-field root exists iff beta > 1", ok, false, detail, t.seconds()};
}

CriterionResult deterministic_limit() {
    Timer t;
    const double alpha = 1e-3;
    const double ratio = meanfield::solve_deterministic(alpha).p_error / hopfield::p_error_formula(alpha);
    return {4, "deterministic limit agrees with one-step formula at alpha=1e-3", std::abs(ratio - 1.0) < 0.02, false,
            printf_string("ratio=%.6f", ratio), t.seconds()};
}

CriterionResult balance(std::uint64_t seed) {
    Timer t;
    RandomStream rng(seed);
    double worst = 0.0;
    std::size_t models = 0;
    auto record = [&](const anneal::BalanceReport& r) {
        worst = std::max({worst, r.detailed_balance, r.stationarity});
        ++models;
    };
    const auto patterns = hopfield::PatternSet::random(2, 3, rng);
    const anneal::SpinFlipModel spins(hopfield::hebb_weights(patterns, hopfield::DiagonalMode::zeroed));
    std::vector<anneal::City> cities;
    for (int i = 0; i < 3; ++i) cities.push_back({rng.uniform(), rng.uniform()});
    const anneal::TspModel tour{anneal::TspInstance(cities)};
    const anneal::TwoLevelModel two(0.0, 1.3);
    for (anneal::Kernel k : {anneal::Kernel::metropolis, anneal::Kernel::glauber})
        for (double beta : {0.5, 1.0, 2.0}) {
            record(anneal::check_balance(spins, k, beta));
            record(anneal::check_balance(tour, k, beta));
            record(anneal::check_balance(two, k, beta));
        }
    return {5, "detailed balance and stationarity", worst < 1e-12, false,
            printf_string("max residual %.2e over %zu model/kernel/beta cases", worst, models), t.seconds()};
}

CriterionResult tsp(std::uint64_t seed) {
    Timer t;
    const anneal::TspModel model(anneal::seven_city_instance());
    const auto oracle = anneal::tsp_brute_force(model.instance());
    RandomStream rng(seed);
    int optimal = 0;
    for (int run = 0; run < 10; ++run) {
        const auto best = protocols::tsp_restarts(model, 20, protocols::tsp_schedule(), rng);
        optimal += best.order == oracle.order && std::abs(best.length - oracle.length) < 1e-9;
    }
    const double secs = t.seconds();
    return {6, "seven-city TSP optimal in 10/10 runs", optimal == 10 && secs < 30.0, false,
            printf_string("%d/10 optimal (L=%.4f over %zu tours), limit 30 s", optimal, oracle.length,
                          oracle.distinct_tours),
            secs};
}

CriterionResult digest(std::uint64_t seed) {
    Timer t;
    const auto instance = anneal::digest_instance(10000);
    const auto exact = anneal::digest_solutions(instance);
    RandomStream rng(seed);
    const auto search = protocols::digest_restarts(instance, 1000, {.beta0 = 1e-3}, rng);
    std::set<anneal::DigestOrdering> found;
    for (const auto& [o, n] : search.found) found.insert(o);
    const double secs = t.seconds();
    const bool ok = search.hits > 0 && found == exact && secs < 120.0;
    return {7, "double digest L=10000 reaches H=0 and finds the exhaustive set", ok, false,
            printf_string("%zu/1000 restarts at H=0, %zu of %zu orderings found, limit 120 s", search.hits,
                          found.size(), exact.size()),
            secs};
}

CriterionResult gradients(std::uint64_t seed) {
    Timer t;
    RandomStream rng(seed);
    bool ok = true;
    std::string detail;
    for (const auto& row : protocols::gradient_audit(50, rng)) {
        ok = ok && row.pass() && row.instances >= 50;
        detail += printf_string("%s%s %.1e", detail.empty() ? "" : "; ", row.check.c_str(), row.max_error);
    }
    return {8, "gradient audit against central differences", ok, false, detail, t.seconds()};
}

CriterionResult xor_pruning(std::uint64_t seed) {
    Timer t;
    const protocols::XorProtocol protocol;
    const Estimate two = protocols::xor_success(2, protocol, 1000, seed, false);
    const Estimate ten = protocols::xor_success(10, protocol, 1000, seed + 1, false);
    const Estimate pruned = protocols::xor_success(10, protocol, 1000, seed + 2, true);
    const double secs = t.seconds();
    const bool two_ok = std::abs(two.value - 0.49) <= 0.10;
    const bool rest_ok = ten.value >= 0.90 && pruned.value >= 0.70 && secs < 600.0;
    return {9, "XOR success rates (1000 seeds)", two_ok && rest_ok, !two_ok && rest_ok,
            printf_string("n=2: %.3f (want 0.49+-0.10)%s, n=10: %.3f (>=0.90), pruned 10->2: %.3f (>=0.70), "
                          "limit 600 s",
                          two.value, two_ok ? "" : " FAIL", ten.value, pruned.value),
            secs};
}

CriterionResult oja(std::uint64_t seed) {
    Timer t;
    const unsupervised::OjaOptions opts{.eta = 5e-5, .steps = 400000, .divergence_norm = 10.0};
    auto count = [&](const unsupervised::Sampler& sampler, const Matrix& c, std::uint64_t base) {
        int good = 0;
        for (std::uint64_t s = 0; s < 10; ++s) {
            RandomStream rng(base + s);
            const Vector w = unsupervised::oja_train(sampler, 2, opts, rng);
            const auto d = unsupervised::oja_diagnostics(w, c);
            good += std::abs(d.norm - 1.0) < 1e-2 && d.angle_deg < 1.0;
        }
        return good;
    };
    const Matrix data = protocols::three_point_data();
    const int a = count(unsupervised::sample_rows(data), unsupervised::second_moment(data), seed * 100);
    const int b = count(unsupervised::gaussian_sampler(Vector{4.0, 1.0}), Matrix{{4.0, 0.0}, {0.0, 1.0}},
                        seed * 100 + 50);
    return {10, "Oja's rule converges to the principal direction", a >= 9 && b >= 9, false,
            printf_string("three-point data %d/10, diag(4,1) %d/10", a, b), t.seconds()};
}

CriterionResult kohonen(std::uint64_t seed) {
    Timer t;
    RandomStream rng(seed);
    const auto run = protocols::kohonen_density_run(200, protocols::Density::ramp, rng);
    const double secs = t.seconds();
    const double e = run.fit.exponent;
    return {11, "Kohonen density exponent, 200 units, ramp", std::abs(e - 2.0 / 3.0) <= 0.10 && secs < 120.0,
            false, printf_string("exponent %.4f (want 0.667+-0.10), limit 120 s", e), secs};
}

CriterionResult cover(std::uint64_t seed) {
    Timer t;
    double worst_half = 0.0, worst_mean = 0.0;
    for (std::size_t m = 1; m <= 10; ++m) {
        worst_half = std::max(worst_half, std::abs(rbf::cover_probability(2 * m, m) - 0.5));
        worst_mean = std::max(worst_mean, std::abs(rbf::expected_max_separable(m).mean - 2.0 * m));
    }
    RandomStream rng(seed);
    const Estimate mc = rbf::separability_mc(8, 4, 2000, rng);
    const bool ok = worst_half < 1e-9 && worst_mean < 1e-9 && std::abs(mc.value - 0.5) <= 0.04;
    return {12, "Cover's theorem", ok, false,
            printf_string("max|P(2m,m)-1/2|=%.1e, max|<n>-2m|=%.1e, MC P(8,4)=%.3f", worst_half, worst_mean,
                          mc.value),
            t.seconds()};
}

CriterionResult mixed(std::uint64_t seed) {
    Timer t;
    RandomStream rng(seed);
    const Estimate s = protocols::mixed_state_overlap(12, 4000, rng);
    const double hot = meanfield::solve_mixed_symmetric(0.8), cold = meanfield::solve_mixed_symmetric(1.5);
    const bool ok = std::abs(s.value - 0.5) < 3.0 * s.std_error && cold > 1e-6 && hot == 0.0;
    return {13, "mixed-state statistics", ok, false,
            printf_string("<s>=%.4f +- %.4f, m(1.5)=%.4f, m(0.8)=%.1e", s.value, s.std_error, cold, hot),
            t.seconds()};
}

CriterionResult monotone(std::uint64_t seed) {
    Timer t;
    RandomStream rng(seed);
    const double worst = protocols::max_energy_increase(100, 10, rng);
    return {14, "asynchronous updates never raise the energy", worst <= 1e-12, false,
            printf_string("largest change %.2e over 100 nets, N <= 10, all states", worst), t.seconds()};
}

}  // namespace

CriterionResult check(int id, std::uint64_t seed) {
    switch (id) {
        case 1: return one_step_error(seed);
        case 2: return capacity();
        case 3: return scalar_mean_field();
        case 4: return deterministic_limit();
        case 5: return balance(seed);
        case 6: return tsp(seed);
        case 7: return digest(seed);
        case 8: return gradients(seed);
        case 9: return xor_pruning(seed);
        case 10: return oja(seed);
        case 11: return kohonen(seed);
        case 12: return cover(seed);
        case 13: return mixed(seed);
        case 14: return monotone(seed);
    }
    throw std::out_of_range("acceptance criterion must be 1..14");
}

std::string format(const CriterionResult& r) {
    return printf_string("[%s] %2d %s: %s (%.2f s)%s", r.pass ? "PASS" : "FAIL", r.id, r.title.c_str(),
                         r.detail.c_str(), r.seconds, r.known_gap ? " [known gap, see README]" : "");
}

}  // namespace neuro::acceptance
