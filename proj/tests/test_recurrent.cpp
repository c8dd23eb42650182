#include "doctest.h"

#include <cmath>
#include <sstream>

#include "neuro/feedforward.hpp"
#include "neuro/numerics.hpp"
#include "neuro/recurrent.hpp"

using namespace neuro;
using namespace neuro::recurrent;

namespace {

RecurrentNet random_net(std::size_t n, std::size_t k, std::size_t m, RandomStream& rng, double scale) {
    RecurrentNet net(n, k, m);
    net.initialize(rng, scale);
    for (double& t : net.theta_v) t = rng.gaussian(0.0, scale);
    for (double& t : net.theta_o) t = rng.gaussian(0.0, scale);
    return net;
}

SequenceTask random_task(std::size_t t_max, std::size_t k, std::size_t m, RandomStream& rng) {
    SequenceTask task{Matrix(t_max, k), Matrix(t_max, m)};
    for (double& x : task.inputs.data()) x = rng.gaussian();
    for (double& y : task.targets.data()) y = rng.uniform(-1.0, 1.0);
    return task;
}

Vector random_vector(std::size_t n, RandomStream& rng) {
    Vector v(n);
    for (double& x : v) x = rng.gaussian();
    return v;
}

// Plain damped iteration x <- (x + F(x)) / 2, independent of the Euler code.
Vector damped_fixed_point(const RecurrentNet& net, std::span<const double> input) {
    const std::size_t n = net.hidden_count();
    Vector x(n, 0.0);
    for (int it = 0; it < 20000; ++it) {
        Vector next(n);
        for (std::size_t i = 0; i < n; ++i) {
            double b = -net.theta_v[i];
            for (std::size_t j = 0; j < n; ++j) b += net.w_vv(i, j) * x[j];
            for (std::size_t j = 0; j < input.size(); ++j) b += net.w_vx(i, j) * input[j];
            next[i] = 0.5 * x[i] + 0.5 * std::tanh(b);
        }
        x = next;
    }
    return x;
}

}  // namespace

TEST_CASE("net shapes are validated") {
    RecurrentNet net(3, 2, 1);
    CHECK_NOTHROW(net.validate());
    net.w_vv = Matrix(3, 2);
    CHECK_THROWS_AS(net.validate(), std::invalid_argument);
    RecurrentNet soft(2, 1, 1);
    soft.g = feedforward::Activation::softmax;
    CHECK_THROWS_AS(soft.validate(), std::invalid_argument);
    RecurrentNet slow(2, 1, 1);
    CHECK_THROWS_AS(relax_states(slow, Vector{0.0}, RelaxOptions{.dt = 1.0, .max_steps = 10, .tol = 1e-9}),
                    std::invalid_argument);
}

TEST_CASE("parameters round-trip") {
    RandomStream rng(1);
    RecurrentNet net = random_net(3, 2, 2, rng, 1.0);
    const Vector p = parameters(net);
    CHECK(p.size() == 9 + 6 + 6 + 3 + 2);
    RecurrentNet other(3, 2, 2);
    set_parameters(other, p);
    CHECK(parameters(other) == p);
    CHECK_THROWS(set_parameters(other, Vector(3)));
}

TEST_CASE("relax_states on trivial nets") {
    RecurrentNet zero(4, 2, 0);
    zero.g = feedforward::Activation::sigmoid;
    const Relaxation r = relax_states(zero, Vector{0.3, -1.0});
    REQUIRE(r.converged);
    for (double v : r.state) CHECK(v == doctest::Approx(0.5).epsilon(1e-8));

    RecurrentNet one(1, 1, 0);
    one.w_vv(0, 0) = 0.5;
    const Relaxation s = relax_states(one, Vector{0.0});
    REQUIRE(s.converged);
    CHECK(std::abs(s.state[0]) < 1e-12);
}

TEST_CASE("relax_states matches damped iteration in the contraction regime") {
    RandomStream rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        RecurrentNet net = random_net(2, 2, 0, rng, 0.4);
        const Vector x = random_vector(2, rng);
        const Relaxation r = relax_states(net, x);
        REQUIRE(r.converged);
        CHECK(max_abs_diff(r.state, damped_fixed_point(net, x)) < 1e-8);
    }
}

TEST_CASE("fixed points satisfy the fixed-point equation") {
    RandomStream rng(11);
    const RelaxOptions opts;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(6);
        RecurrentNet net = random_net(n, 3, 0, rng, 0.8 / std::sqrt(static_cast<double>(n)));
        const Vector x = random_vector(3, rng);
        const Relaxation r = relax_states(net, x, opts);
        REQUIRE(r.converged);
        CHECK(r.residual < 10 * opts.tol);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(r.state[i] - std::tanh(r.fields[i])) < 10 * opts.tol);
    }
}

TEST_CASE("an unstable net reports divergence") {
    RecurrentNet net(2, 0, 0);
    net.g = feedforward::Activation::identity;
    net.w_vv = Matrix{{1.5, 0.0}, {0.0, 1.5}};
    net.theta_v = {-1.0, 0.0};
    const Relaxation r = relax_states(net, Vector{}, RelaxOptions{.dt = std::nullopt, .max_steps = 2000, .tol = 1e-9});
    CHECK_FALSE(r.converged);
    CHECK_FALSE(r.report.empty());
    const Relaxation d = relax_errors(net, r, Vector{1.0, 0.0});
    CHECK_FALSE(d.converged);

    const Vector before = parameters(net);
    const std::size_t out[] = {0};
    const BpStep step = recurrent_bp_step(net, Vector{}, out, Vector{0.0}, 0.1,
                                          RelaxOptions{.dt = std::nullopt, .max_steps = 2000, .tol = 1e-9});
    CHECK_FALSE(step.updated);
    CHECK(parameters(net) == before);
}

TEST_CASE("relax_errors: zero error, scalar closed form, matrix solve") {
    RandomStream rng(3);
    SUBCASE("zero error") {
        RecurrentNet net = random_net(3, 2, 0, rng, 0.3);
        const Relaxation v = relax_states(net, Vector{0.5, -0.5});
        const Relaxation d = relax_errors(net, v, Vector(3, 0.0));
        REQUIRE(d.converged);
        for (double x : d.state) CHECK(x == 0.0);
    }
    SUBCASE("one neuron") {
        RecurrentNet net(1, 1, 0);
        net.w_vv(0, 0) = 0.6;
        net.w_vx(0, 0) = 0.8;
        net.theta_v[0] = 0.1;
        const Relaxation v = relax_states(net, Vector{1.0});
        const double e = 0.7;
        const Relaxation d = relax_errors(net, v, Vector{e});
        REQUIRE(d.converged);
        const double gp = 1.0 - std::tanh(v.fields[0]) * std::tanh(v.fields[0]);
        CHECK(d.state[0] == doctest::Approx(gp * e / (1.0 - 0.6 * gp)).epsilon(1e-8));
    }
    SUBCASE("three neurons against an explicit inverse") {
        for (int trial = 0; trial < 20; ++trial) {
            RecurrentNet net = random_net(3, 2, 0, rng, 0.5);
            const Relaxation v = relax_states(net, random_vector(2, rng));
            const Vector e = random_vector(3, rng);
            const Relaxation d = relax_errors(net, v, e);
            REQUIRE(d.converged);
            Matrix l = Matrix::identity(3);
            Vector gp(3);
            for (std::size_t i = 0; i < 3; ++i) {
                gp[i] = 1.0 - std::tanh(v.fields[i]) * std::tanh(v.fields[i]);
                for (std::size_t j = 0; j < 3; ++j) l(i, j) -= gp[i] * net.w_vv(i, j);
            }
            const Vector u = inverse(l).transpose() * e;
            for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(d.state[i] - gp[i] * u[i]) < 1e-8);
        }
    }
}

TEST_CASE("relaxed errors agree with the direct linear solve") {
    RandomStream rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(6);
        RecurrentNet net = random_net(n, 2, 0, rng, 0.8 / std::sqrt(static_cast<double>(n)));
        const Relaxation v = relax_states(net, random_vector(2, rng));
        const Vector e = random_vector(n, rng);
        const Relaxation d = relax_errors(net, v, e);
        REQUIRE(d.converged);
        CHECK(max_abs_diff(d.state, solve_errors(net, v.fields, e)) < 1e-8);
    }
}

TEST_CASE("recurrent backprop follows the gradient of the steady-state energy") {
    RandomStream rng(17);
    const RelaxOptions tight{.dt = std::nullopt, .max_steps = 1000000, .tol = 1e-14};
    for (int trial = 0; trial < 10; ++trial) {
        RecurrentNet net = random_net(4, 2, 0, rng, 0.4);
        const Vector x = random_vector(2, rng);
        const std::size_t out[] = {0, 2};
        const Vector y{0.3, -0.4};
        const double eta = 0.01;

        auto energy_at = [&](std::span<const double> p) {
            RecurrentNet probe = net;
            set_parameters(probe, p);
            return *steady_energy(probe, x, out, y, tight);
        };
        const Vector p0 = parameters(net);
        const Vector fd = finite_diff_gradient(energy_at, p0, 1e-5);

        RecurrentNet stepped = net;
        const BpStep step = recurrent_bp_step(stepped, x, out, y, eta, tight);
        REQUIRE(step.updated);
        const Vector p1 = parameters(stepped);
        Vector increment(p0.size()), expected(p0.size());
        for (std::size_t i = 0; i < p0.size(); ++i) {
            increment[i] = p1[i] - p0[i];
            expected[i] = -eta * fd[i];
        }
        CHECK(relative_error(increment, expected) < 1e-5);
    }
}

TEST_CASE("zero output error leaves the net unchanged") {
    RandomStream rng(2);
    RecurrentNet net = random_net(3, 2, 0, rng, 0.3);
    const Vector x{0.2, 0.9};
    const Relaxation v = relax_states(net, x);
    const std::size_t out[] = {1};
    const Vector before = parameters(net);
    const BpStep step = recurrent_bp_step(net, x, out, Vector{v.state[1]}, 0.5);
    CHECK(step.updated);
    CHECK(step.energy == 0.0);
    CHECK(parameters(net) == before);
}

TEST_CASE("two-pattern association is learned") {
    const Vector x1{1.0, -1.0}, x2{-1.0, 1.0};
    const std::size_t out[] = {0, 1};
    const Vector y1{0.5, -0.3}, y2{-0.4, 0.6};
    int learned = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RandomStream rng(seed);
        RecurrentNet net(3, 2, 0);
        net.initialize(rng, 0.3);
        double h = 1.0;
        for (int step = 0; step < 5000 && h >= 1e-3; ++step) {
            const bool first = step % 2 == 0;
            recurrent_bp_step(net, first ? x1 : x2, out, first ? y1 : y2, 0.1);
            if (step % 2 == 1) {
                const auto h1 = steady_energy(net, x1, out, y1);
                const auto h2 = steady_energy(net, x2, out, y2);
                if (h1 && h2) h = *h1 + *h2;
            }
        }
        learned += h < 1e-3;
    }
    CHECK(learned >= 8);
}

TEST_CASE("run_sequence follows the discrete dynamics") {
    RecurrentNet net(1, 1, 1);
    net.w_vv(0, 0) = 0.5;
    net.w_vx(0, 0) = 1.0;
    net.w_ov(0, 0) = 2.0;
    net.theta_o[0] = 0.25;
    const Matrix x{{1.0}, {0.0}, {-1.0}};
    const SequenceTrace tr = run_sequence(net, x);
    double v = 0.0;
    for (std::size_t t = 0; t < 3; ++t) {
        v = std::tanh(0.5 * v + x(t, 0));
        CHECK(tr.states(t + 1, 0) == doctest::Approx(v).epsilon(1e-15));
        CHECK(tr.outputs(t, 0) == doctest::Approx(2.0 * v - 0.25).epsilon(1e-15));
    }
    CHECK(tr.states(0, 0) == 0.0);
}

TEST_CASE("BPTT at T = 1 equals ordinary backprop") {
    RandomStream rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        RecurrentNet net = random_net(3, 2, 2, rng, 0.7);
        const SequenceTask task = random_task(1, 2, 2, rng);
        const BpttGradients g = bptt_gradients(net, task);

        feedforward::LayeredNet ff(2);
        auto& hidden = ff.add_dense(3, feedforward::Activation::tanh);
        auto& output = ff.add_dense(2, feedforward::Activation::identity);
        (void)hidden;
        (void)output;
        Vector p;
        p.insert(p.end(), net.w_vx.data().begin(), net.w_vx.data().end());
        p.insert(p.end(), net.theta_v.begin(), net.theta_v.end());
        p.insert(p.end(), net.w_ov.data().begin(), net.w_ov.data().end());
        p.insert(p.end(), net.theta_o.begin(), net.theta_o.end());
        ff.set_parameters(p);
        const feedforward::Gradient ref = feedforward::backprop(ff, task.inputs, task.targets, feedforward::Loss::quadratic);

        Vector mine;
        mine.insert(mine.end(), g.w_vx.data().begin(), g.w_vx.data().end());
        mine.insert(mine.end(), g.theta_v.begin(), g.theta_v.end());
        mine.insert(mine.end(), g.w_ov.data().begin(), g.w_ov.data().end());
        mine.insert(mine.end(), g.theta_o.begin(), g.theta_o.end());
        CHECK(max_abs_diff(mine, ref.gradient) < 1e-12);
        CHECK(g.energy == doctest::Approx(ref.loss).epsilon(1e-12));
        // V_0 = 0, so nothing flows into w_vv.
        for (double w : g.w_vv.data()) CHECK(w == 0.0);
    }
}

TEST_CASE("scalar net, T = 3, matches finite differences") {
    RecurrentNet net(1, 1, 1);
    net.w_vv(0, 0) = 0.7;
    net.w_vx(0, 0) = -0.4;
    net.w_ov(0, 0) = 1.3;
    net.theta_v[0] = 0.2;
    net.theta_o[0] = -0.1;
    const SequenceTask task{Matrix{{1.0}, {0.5}, {-2.0}}, Matrix{{0.3}, {-0.2}, {0.8}}};
    const Vector fd = finite_diff_gradient(
        [&](std::span<const double> p) {
            RecurrentNet probe = net;
            set_parameters(probe, p);
            return sequence_energy(probe, task);
        },
        parameters(net), 1e-5);
    CHECK(relative_error(bptt_gradients(net, task).flatten(), fd) < 1e-6);
}

TEST_CASE("BPTT gradients match finite differences") {
    RandomStream rng(29);
    int instances = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(4), k = 1 + rng.uniform_index(3), m = 1 + rng.uniform_index(2);
        const std::size_t t_max = 1 + rng.uniform_index(8);
        RecurrentNet net = random_net(n, k, m, rng, 0.6);
        if (trial % 2) net.g_out = feedforward::Activation::sigmoid;
        const SequenceTask task = random_task(t_max, k, m, rng);
        const Vector v0 = trial % 3 ? Vector{} : random_vector(n, rng);
        const Vector fd = finite_diff_gradient(
            [&](std::span<const double> p) {
                RecurrentNet probe = net;
                set_parameters(probe, p);
                return sequence_energy(probe, task, v0);
            },
            parameters(net), 1e-5);
        CHECK(relative_error(bptt_gradients(net, task, v0).flatten(), fd) < 1e-6);
        ++instances;
    }
    CHECK(instances >= 50);
}

TEST_CASE("zero recurrent weights decouple the time steps") {
    RandomStream rng(31);
    RecurrentNet net = random_net(3, 2, 2, rng, 0.7);
    net.w_vv = Matrix(3, 3);
    const SequenceTask task = random_task(5, 2, 2, rng);
    const BpttGradients full = bptt_gradients(net, task);
    Vector summed(parameters(net).size(), 0.0);
    for (std::size_t t = 0; t < 5; ++t) {
        SequenceTask single{Matrix(1, 2), Matrix(1, 2)};
        std::copy(task.inputs.row(t).begin(), task.inputs.row(t).end(), single.inputs.row(0).begin());
        std::copy(task.targets.row(t).begin(), task.targets.row(t).end(), single.targets.row(0).begin());
        const Vector g = bptt_gradients(net, single).flatten();
        for (std::size_t i = 0; i < g.size(); ++i) summed[i] += g[i];
        // Each delta is just the direct term of its own step.
        const BpttGradients one = bptt_gradients(net, single);
        CHECK(max_abs_diff(one.deltas.row(0), full.deltas.row(t)) < 1e-15);
    }
    const Vector f = full.flatten();
    // w_vv gradients still see V_{t-1}; everything after them must agree.
    for (std::size_t i = 9; i < f.size(); ++i) CHECK(f[i] == doctest::Approx(summed[i]).epsilon(1e-12));
}

TEST_CASE("truncated BPTT") {
    RandomStream rng(37);
    RecurrentNet net = random_net(3, 2, 2, rng, 0.7);
    const SequenceTask task = random_task(6, 2, 2, rng);
    const Vector full = bptt_gradients(net, task).flatten();
    for (std::size_t tau : {6u, 7u, 100u})
        CHECK(max_abs_diff(bptt_truncated(net, task, tau).flatten(), full) < 1e-13);
    CHECK_THROWS(bptt_truncated(net, task, 0));

    // tau = 1 keeps only sum_i Delta_i w_ov_ij g'(b_j).
    const BpttGradients t1 = bptt_truncated(net, task, 1);
    const SequenceTrace tr = run_sequence(net, task.inputs);
    for (std::size_t t = 0; t < 6; ++t)
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < 2; ++i) s += (task.targets(t, i) - tr.outputs(t, i)) * net.w_ov(i, j);
            const double v = std::tanh(tr.fields(t, j));
            CHECK(t1.deltas(t, j) == doctest::Approx(s * (1.0 - v * v)).epsilon(1e-12));
        }
}

TEST_CASE("truncation at T = 10 lands between the extremes") {
    // Positive weights, inputs and residuals make every contribution add.
    RecurrentNet net(1, 1, 1);
    net.w_vv(0, 0) = 0.8;
    net.w_vx(0, 0) = 0.5;
    net.w_ov(0, 0) = 1.0;
    SequenceTask task{Matrix(10, 1, 0.5), Matrix(10, 1, 2.0)};
    const double lo = norm(bptt_truncated(net, task, 1).flatten());
    const double hi = norm(bptt_gradients(net, task).flatten());
    double prev = lo;
    for (std::size_t tau = 2; tau <= 9; ++tau) {
        const double mid = norm(bptt_truncated(net, task, tau).flatten());
        CHECK(mid > lo);
        CHECK(mid < hi);
        CHECK(mid >= prev);
        prev = mid;
    }
}

TEST_CASE("errors vanish geometrically backwards in time") {
    RecurrentNet net(1, 1, 1);
    net.w_vv(0, 0) = 0.5;
    net.w_vx(0, 0) = 1.0;
    net.w_ov(0, 0) = 1.0;
    const std::size_t t_max = 20;
    SequenceTask task{Matrix(t_max, 1, 0.3), Matrix(t_max, 1)};
    // Start at the fixed point so that every local field is the same.
    RecurrentNet probe(1, 1, 0);
    probe.w_vv(0, 0) = 0.5;
    probe.w_vx(0, 0) = 1.0;
    const Relaxation fp = relax_states(probe, Vector{0.3}, RelaxOptions{.dt = std::nullopt, .max_steps = 100000, .tol = 1e-15});
    const Vector v0 = fp.state;
    const SequenceTrace tr = run_sequence(net, task.inputs, v0);
    // Only the last step carries an output error.
    for (std::size_t t = 0; t < t_max; ++t) task.targets(t, 0) = tr.outputs(t, 0);
    task.targets(t_max - 1, 0) += 1.0;
    const BpttGradients g = bptt_gradients(net, task, v0);
    const double gp = 1.0 - v0[0] * v0[0];
    const double expected = std::abs(0.5 * gp);
    for (std::size_t t = 0; t + 1 < t_max; ++t) {
        const double ratio = std::abs(g.deltas(t, 0) / g.deltas(t + 1, 0));
        CHECK(std::abs(ratio - expected) < 0.05 * expected);
    }
    CHECK(std::abs(g.deltas(0, 0)) < std::pow(expected, 18) * std::abs(g.deltas(t_max - 1, 0)) * 1.1);
}

TEST_CASE("apply_gradients lowers the sequence energy") {
    RandomStream rng(41);
    RecurrentNet net = random_net(4, 1, 1, rng, 0.5);
    const SequenceTask task = random_task(8, 1, 1, rng);
    double h = sequence_energy(net, task);
    for (int step = 0; step < 200; ++step) {
        apply_gradients(net, bptt_gradients(net, task), 0.02);
        const double next = sequence_energy(net, task);
        CHECK(next <= h + 1e-12);
        h = next;
    }
}

TEST_CASE("sequence task files") {
    RandomStream rng(43);
    const SequenceTask task = random_task(4, 3, 2, rng);
    std::stringstream ss;
    write_sequence_task(ss, task);
    const SequenceTask back = read_sequence_task(ss);
    CHECK(back.inputs == task.inputs);
    CHECK(back.targets == task.targets);

    std::istringstream header("2 1 1\n0.5 1\n0.25 0\n");
    const SequenceTask small = read_sequence_task(header);
    CHECK(small.length() == 2);
    CHECK(small.inputs(1, 0) == 0.25);
    CHECK(small.targets(0, 0) == 1.0);

    std::istringstream truncated("3 1 1\n0.5 1\n");
    CHECK_THROWS_AS(read_sequence_task(truncated), Error);
    std::istringstream junk("x y z");
    CHECK_THROWS_AS(read_sequence_task(junk), Error);
    CHECK_THROWS_AS(load_sequence_task("/nonexistent/sequence.txt"), Error);
}
