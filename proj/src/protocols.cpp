#include "neuro/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "neuro/hopfield.hpp"
#include "neuro/recurrent.hpp"

namespace neuro::protocols {

using feedforward::Activation;
using feedforward::LabeledSet;
using feedforward::LayeredNet;
using feedforward::Loss;
using feedforward::Mode;
using feedforward::TargetConvention;
using feedforward::TrainConfig;

// ---------------------------------------------------------------------------
// XOR

LabeledSet xor_training_set(bool plus_minus_inputs) {
    const double lo = plus_minus_inputs ? -1.0 : 0.0;
    return {Matrix{{lo, lo}, {lo, 1.0}, {1.0, lo}, {1.0, 1.0}}, Matrix{{0.0}, {1.0}, {1.0}, {0.0}},
            TargetConvention::zero_one};
}

namespace {

LayeredNet xor_net_shape(std::size_t hidden) {
    LayeredNet net(2);
    net.add_dense(hidden, Activation::relu);
    net.add_dense(1, Activation::sigmoid);
    return net;
}

TrainConfig xor_config(const XorProtocol& p, std::size_t steps) {
    TrainConfig cfg;
    cfg.learning_rate = p.eta;
    cfg.batch_size = 1;
    cfg.epochs = std::max<std::size_t>(1, steps / 4);
    cfg.patience = std::nullopt;
    cfg.max_norm = p.max_norm;
    cfg.loss = Loss::cross_entropy_sigmoid;
    cfg.initialize = false;
    return cfg;
}

bool solved(const LayeredNet& net, const LabeledSet& data) {
    return feedforward::classification_error(net.predict(data.inputs), data.targets, data.convention) == 0.0;
}

}  // namespace

bool xor_trial(std::size_t hidden, const XorProtocol& protocol, RandomStream& rng) {
    const LabeledSet data = xor_training_set(protocol.plus_minus_inputs);
    LayeredNet net = xor_net_shape(hidden);
    net.initialize(rng, protocol.init_std);
    feedforward::train(net, data, nullptr, xor_config(protocol, protocol.steps), rng);
    return solved(net, data);
}

bool xor_pruned_trial(std::size_t hidden, const XorProtocol& protocol, RandomStream& rng) {
    if (protocol.prune_to < 1 || protocol.prune_to > hidden) throw std::invalid_argument("xor_pruned_trial: bad target size");
    if (protocol.prune_every < 4) throw std::invalid_argument("xor_pruned_trial: prune_every too small");
    const LabeledSet data = xor_training_set(protocol.plus_minus_inputs);
    LayeredNet net = xor_net_shape(hidden);
    net.initialize(rng, protocol.init_std);
    const Vector initial = net.parameters();
    const TrainConfig block = xor_config(protocol, protocol.prune_every);
    const std::size_t n = hidden;
    // Input weights, threshold and output weight of hidden unit j.
    auto unit_parameters = [n](std::size_t j) {
        return std::vector<std::size_t>{2 * j, 2 * j + 1, 2 * n + j, 3 * n + j};
    };
    std::vector<bool> alive(n, true);
    std::size_t remaining = n;
    for (std::size_t done = 0; done + protocol.prune_every <= protocol.steps; done += protocol.prune_every) {
        feedforward::train(net, data, nullptr, block, rng);
        if (remaining <= protocol.prune_to) continue;
        const Vector h = feedforward::diagonal_hessian(net, data, block.loss);
        const Vector w = net.parameters();
        std::size_t victim = n;
        double least = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (!alive[j]) continue;
            double s = 0.0;
            for (std::size_t k : unit_parameters(j)) s += feedforward::obs_saliency(w[k], std::max(h[k], 0.0));
            if (s < least) {
                least = s;
                victim = j;
            }
        }
        alive[victim] = false;
        --remaining;
        for (std::size_t k : unit_parameters(victim)) net.prune(k);
    }
    net.set_parameters(initial);
    feedforward::train(net, data, nullptr, xor_config(protocol, protocol.steps), rng);
    return solved(net, data);
}

Estimate xor_success(std::size_t hidden, const XorProtocol& protocol, std::size_t seeds, std::uint64_t seed,
                     bool pruned) {
    RandomStream master(seed);
    std::size_t ok = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
        RandomStream rng = master.split();
        ok += pruned ? xor_pruned_trial(hidden, protocol, rng) : xor_trial(hidden, protocol, rng);
    }
    return binomial_estimate(ok, seeds);
}

// ---------------------------------------------------------------------------
// Annealing

anneal::Schedule tsp_schedule() {
    return {.beta0 = 0.5, .multiplier = 1.1, .sweeps_per_stage = 100, .stages = 50};
}

TourSearch tsp_restarts(const anneal::TspModel& model, std::size_t restarts, const anneal::Schedule& schedule,
                        RandomStream& rng) {
    if (restarts == 0) throw std::invalid_argument("tsp_restarts: need at least one restart");
    TourSearch best{{}, std::numeric_limits<double>::infinity()};
    for (std::size_t r = 0; r < restarts; ++r) {
        const auto run = anneal::anneal(model, model.random_tour(rng), schedule, rng);
        if (!run.best.is_permutation()) continue;
        const auto order = run.best.order();
        const double length = anneal::tour_length(order, model.instance());
        if (length < best.length) best = {anneal::canonical_tour(order), length};
    }
    return best;
}

DigestSearch digest_restarts(const anneal::DigestInstance& instance, std::size_t restarts,
                             const anneal::Schedule& schedule, RandomStream& rng) {
    const anneal::DigestModel model(instance);
    DigestSearch search;
    search.restarts = restarts;
    search.best_energy = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < restarts; ++r) {
        const auto run = anneal::anneal(model, model.random_configuration(rng), schedule, rng, {.target_energy = 0.0});
        search.best_energy = std::min(search.best_energy, run.best_energy);
        if (run.best_energy == 0.0) {
            ++search.hits;
            ++search.found[anneal::canonical_ordering(instance, run.best)];
        }
    }
    return search;
}

// ---------------------------------------------------------------------------
// Unsupervised learning

Matrix three_point_data() { return Matrix{{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}}; }

Density parse_density(const std::string& name) {
    if (name == "ramp") return Density::ramp;
    if (name == "uniform") return Density::uniform;
    if (name == "quadratic") return Density::quadratic;
    throw std::invalid_argument("unknown density '" + name + "' (ramp, uniform, quadratic)");
}

std::string to_string(Density density) {
    switch (density) {
        case Density::ramp: return "ramp";
        case Density::uniform: return "uniform";
        case Density::quadratic: return "quadratic";
    }
    return "?";
}

double density_value(Density density, double x) {
    switch (density) {
        case Density::ramp: return 2.0 * x;
        case Density::uniform: return 1.0;
        case Density::quadratic: return 3.0 * x * x;
    }
    return 0.0;
}

unsupervised::Sampler density_sampler(Density density) {
    switch (density) {
        case Density::ramp: return [](RandomStream& rng) { return Vector{std::sqrt(rng.uniform())}; };
        case Density::uniform: return [](RandomStream& rng) { return Vector{rng.uniform()}; };
        case Density::quadratic: return [](RandomStream& rng) { return Vector{std::cbrt(rng.uniform())}; };
    }
    throw std::invalid_argument("density_sampler: unknown density");
}

DensityRun kohonen_density_run(std::size_t units, Density density, RandomStream& rng) {
    DensityRun run{unsupervised::SelfOrganizingMap::line(units, 1), {}};
    const auto sampler = density_sampler(density);
    unsupervised::initialize_from_samples(run.map, sampler, rng);
    unsupervised::kohonen_train(run.map, sampler, unsupervised::KohonenSchedule::standard(run.map), rng);
    run.fit = unsupervised::kohonen_density_exponent(run.map, [density](double w) { return density_value(density, w); });
    return run;
}

// ---------------------------------------------------------------------------
// Hopfield statistics

Estimate mixed_state_overlap(std::size_t n, std::size_t trials, RandomStream& rng) {
    if (trials < 2) throw std::invalid_argument("mixed_state_overlap: need at least two trials");
    const std::size_t all[] = {0, 1, 2};
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto patterns = hopfield::PatternSet::random(3, n, rng);
        const auto mix = hopfield::mixed_state(patterns, all);
        double s = 0.0;
        for (std::size_t mu = 0; mu < 3; ++mu) s += hopfield::overlap(mix, patterns.pattern(mu));
        s /= 3.0;
        sum += s;
        sum2 += s * s;
    }
    const double mean = sum / static_cast<double>(trials);
    const double var = (sum2 - sum * mean) / static_cast<double>(trials - 1);
    return {mean, std::sqrt(std::max(var, 0.0) / static_cast<double>(trials))};
}

double max_energy_increase(std::size_t nets, std::size_t max_n, RandomStream& rng) {
    if (max_n < 2) throw std::invalid_argument("max_energy_increase: need max_n >= 2");
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nets; ++k) {
        const std::size_t n = 2 + k % (max_n - 1);
        const auto patterns = hopfield::PatternSet::random(1 + rng.uniform_index(4), n, rng);
        const auto net = hopfield::hebb_weights(patterns, k % 2 ? hopfield::DiagonalMode::zeroed
                                                                : hopfield::DiagonalMode::kept);
        hopfield::SpinState s(n);
        for (std::size_t code = 0; code < (std::size_t{1} << n); ++code) {
            for (std::size_t i = 0; i < n; ++i) s[i] = (code >> i) & 1 ? 1 : -1;
            const double h0 = hopfield::energy(net, s);
            for (std::size_t i = 0; i < n; ++i) {
                const auto s1 = hopfield::update_deterministic(net, s, hopfield::UpdateMode::async_typewriter, rng, i);
                worst = std::max(worst, hopfield::energy(net, s1) - h0);
            }
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Gradient audit

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, RandomStream& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.gaussian(0.0, scale);
    return m;
}

Matrix one_hot(std::size_t rows, std::size_t cols, RandomStream& rng) {
    Matrix t(rows, cols);
    for (std::size_t mu = 0; mu < rows; ++mu) t(mu, rng.uniform_index(cols)) = 1.0;
    return t;
}

Matrix binary(std::size_t rows, std::size_t cols, RandomStream& rng) {
    Matrix t(rows, cols);
    for (double& v : t.data()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    return t;
}

Matrix targets_for(Loss loss, std::size_t rows, std::size_t cols, RandomStream& rng) {
    switch (loss) {
        case Loss::loglikelihood_softmax: return one_hot(rows, cols, rng);
        case Loss::cross_entropy_sigmoid: return binary(rows, cols, rng);
        case Loss::quadratic: return random_matrix(rows, cols, rng, 0.5);
    }
    return {};
}

Activation output_for(Loss loss) {
    switch (loss) {
        case Loss::loglikelihood_softmax: return Activation::softmax;
        case Loss::cross_entropy_sigmoid: return Activation::sigmoid;
        case Loss::quadratic: return Activation::tanh;
    }
    return Activation::identity;
}

void jitter(LayeredNet& net, RandomStream& rng, double scale) {
    Vector p = net.parameters();
    for (double& v : p) v += rng.gaussian(0.0, scale);
    net.set_parameters(p);
}

double backprop_error(LayeredNet net, const Matrix& x, const Matrix& t, Loss loss, Mode mode) {
    const auto g = feedforward::backprop(net, x, t, loss, mode);
    const auto fd = finite_diff_gradient(
        [&](std::span<const double> p) {
            net.set_parameters(p);
            return feedforward::loss_value(loss, net.forward(x, mode).output(), t);
        },
        net.parameters(), 1e-5);
    return relative_error(g.gradient, fd);
}

double min_abs_relu_field(const LayeredNet& net, const Matrix& x) {
    const auto pass = net.forward(x, Mode::infer);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < net.layer_count(); ++l)
        if (net.layer(l).activation() == Activation::relu)
            for (double b : pass.layers[l].fields.data()) m = std::min(m, std::abs(b));
    return m;
}

template <typename F>
AuditRow audit(const std::string& name, std::size_t instances, double tolerance, F&& one) {
    AuditRow row{name, 0, 0.0, tolerance};
    while (row.instances < instances) {
        const auto e = one();
        if (!e) continue;  // instance rejected (ReLU kink)
        row.max_error = std::max(row.max_error, *e);
        ++row.instances;
    }
    return row;
}

LayeredNet dense_stack(std::size_t inputs, std::size_t outputs, Activation hidden, Activation out,
                       RandomStream& rng) {
    LayeredNet net(inputs);
    const std::size_t depth = 1 + rng.uniform_index(3);
    for (std::size_t l = 0; l < depth; ++l) net.add_dense(2 + rng.uniform_index(4), hidden);
    net.add_dense(outputs, out);
    net.initialize(rng);
    return net;
}

recurrent::RecurrentNet random_recurrent(std::size_t n, std::size_t k, std::size_t m, RandomStream& rng,
                                         double scale) {
    recurrent::RecurrentNet net(n, k, m);
    net.initialize(rng, scale);
    for (double& t : net.theta_v) t = rng.gaussian(0.0, scale);
    for (double& t : net.theta_o) t = rng.gaussian(0.0, scale);
    return net;
}

}  // namespace

std::vector<AuditRow> gradient_audit(std::size_t instances, RandomStream& rng) {
    std::vector<AuditRow> rows;
    using Result = std::optional<double>;

    rows.push_back(audit("dense-tanh", instances, 1e-6, [&]() -> Result {
        const std::size_t n_in = 1 + rng.uniform_index(4), n_out = 1 + rng.uniform_index(3);
        LayeredNet net = dense_stack(n_in, n_out, Activation::tanh, Activation::tanh, rng);
        jitter(net, rng, 0.2);
        return backprop_error(net, random_matrix(3, n_in, rng), random_matrix(3, n_out, rng, 0.5), Loss::quadratic,
                              Mode::infer);
    }));
    rows.push_back(audit("dense-relu", instances, 1e-5, [&]() -> Result {
        LayeredNet net(3);
        net.add_dense(6, Activation::relu);
        net.add_dense(4, Activation::relu);
        net.add_dense(2, Activation::identity);
        net.initialize(rng);
        const Matrix x = random_matrix(3, 3, rng);
        if (min_abs_relu_field(net, x) < 1e-3) return std::nullopt;
        return backprop_error(net, x, random_matrix(3, 2, rng), Loss::quadratic, Mode::infer);
    }));
    for (Loss loss : {Loss::quadratic, Loss::loglikelihood_softmax, Loss::cross_entropy_sigmoid}) {
        const std::string name = loss == Loss::quadratic               ? "loss-quadratic"
                                 : loss == Loss::loglikelihood_softmax ? "loss-softmax-loglikelihood"
                                                                       : "loss-sigmoid-cross-entropy";
        rows.push_back(audit(name, instances, 1e-6, [&]() -> Result {
            const std::size_t n_in = 1 + rng.uniform_index(4), n_out = 2 + rng.uniform_index(3);
            LayeredNet net = dense_stack(n_in, n_out, Activation::sigmoid, output_for(loss), rng);
            jitter(net, rng, 0.2);
            return backprop_error(net, random_matrix(3, n_in, rng), targets_for(loss, 3, n_out, rng), loss,
                                  Mode::infer);
        }));
    }
    for (bool pool : {false, true}) {
        rows.push_back(audit(pool ? "maxpool" : "convolution", instances, 1e-6, [&]() -> Result {
            const std::size_t channels = 1 + rng.uniform_index(2);
            const std::size_t stride = pool ? 1 : 1 + rng.uniform_index(2);
            const std::size_t pad = rng.uniform_index(2);
            const std::size_t side = stride == 1 ? 6 : 7;
            LayeredNet net(feedforward::Shape{channels, side, side});
            net.add_convolution(2, 3, 3, stride, pad, Activation::tanh);
            if (pool) {
                const std::size_t rows_out = net.layer(0).output_shape().rows;
                net.add_maxpool(2, rows_out % 2 == 0 ? 2 : 1);
            }
            net.add_dense(3, Activation::softmax);
            net.initialize(rng);
            jitter(net, rng, 0.1);
            return backprop_error(net, random_matrix(2, net.input_size(), rng), one_hot(2, 3, rng),
                                  Loss::loglikelihood_softmax, Mode::infer);
        }));
    }
    for (Mode mode : {Mode::train, Mode::infer}) {
        rows.push_back(audit(mode == Mode::train ? "batchnorm-train" : "batchnorm-infer", instances, 1e-6,
                             [&]() -> Result {
                                 LayeredNet net(3);
                                 net.add_dense(4, Activation::identity);
                                 net.add_batchnorm(Activation::tanh);
                                 net.add_dense(2, Activation::sigmoid);
                                 net.initialize(rng);
                                 jitter(net, rng, 0.3);
                                 return backprop_error(net, random_matrix(5, 3, rng), binary(5, 2, rng),
                                                       Loss::cross_entropy_sigmoid, mode);
                             }));
    }
    rows.push_back(audit("recurrent-bp", instances, 1e-6, [&]() -> Result {
        const recurrent::RelaxOptions tight{.dt = std::nullopt, .max_steps = 1000000, .tol = 1e-14};
        const std::size_t n = 2 + rng.uniform_index(3), k = 1 + rng.uniform_index(2);
        const recurrent::RecurrentNet net = random_recurrent(n, k, 0, rng, 0.4);
        Vector x(k);
        for (double& v : x) v = rng.gaussian();
        const std::vector<std::size_t> out{0, n - 1};
        const Vector y{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
        const Vector p0 = recurrent::parameters(net);
        bool ok = true;
        const Vector fd = finite_diff_gradient(
            [&](std::span<const double> p) {
                recurrent::RecurrentNet probe = net;
                recurrent::set_parameters(probe, p);
                const auto e = recurrent::steady_energy(probe, x, out, y, tight);
                ok = ok && e.has_value();
                return e.value_or(0.0);
            },
            p0, 1e-5);
        const double eta = 1.0;
        recurrent::RecurrentNet stepped = net;
        const auto step = recurrent::recurrent_bp_step(stepped, x, out, y, eta, tight);
        if (!ok || !step.updated) return std::nullopt;
        const Vector p1 = recurrent::parameters(stepped);
        Vector g(p0.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = (p0[i] - p1[i]) / eta;
        return relative_error(g, fd);
    }));
    rows.push_back(audit("bptt-T5", instances, 1e-6, [&]() -> Result {
        const std::size_t n = 1 + rng.uniform_index(4), k = 1 + rng.uniform_index(3), m = 1 + rng.uniform_index(2);
        recurrent::RecurrentNet net = random_recurrent(n, k, m, rng, 0.6);
        if (rng.bernoulli(0.5)) net.g_out = Activation::sigmoid;
        recurrent::SequenceTask task{Matrix(5, k), Matrix(5, m)};
        for (double& v : task.inputs.data()) v = rng.gaussian();
        for (double& v : task.targets.data()) v = rng.uniform(-1.0, 1.0);
        const Vector fd = finite_diff_gradient(
            [&](std::span<const double> p) {
                recurrent::RecurrentNet probe = net;
                recurrent::set_parameters(probe, p);
                return recurrent::sequence_energy(probe, task);
            },
            recurrent::parameters(net), 1e-5);
        return relative_error(recurrent::bptt_gradients(net, task).flatten(), fd);
    }));
    return rows;
}

}  // namespace neuro::protocols
