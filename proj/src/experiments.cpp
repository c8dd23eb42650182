#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "neuro/acceptance.hpp"
#include "neuro/anneal.hpp"
#include "neuro/feedforward.hpp"
#include "neuro/harness.hpp"
#include "neuro/hopfield.hpp"
#include "neuro/meanfield.hpp"
#include "neuro/protocols.hpp"
#include "neuro/rbf.hpp"
#include "neuro/reinforce.hpp"
#include "neuro/unsupervised.hpp"

namespace neuro::harness {

namespace {

namespace ff = feedforward;
namespace us = unsupervised;

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? std::string(1, sep) : "") + parts[i];
    return s;
}

template <typename T>
std::string join_numbers(const std::vector<T>& xs, char sep) {
    std::vector<std::string> parts;
    for (const auto& x : xs) parts.push_back(Table::cell(x));
    return join(parts, sep);
}

std::string city_name(std::size_t i, std::size_t k) {
    return k <= 26 ? std::string(1, static_cast<char>('A' + i)) : std::to_string(i);
}

// ---------------------------------------------------------------------------
// Hopfield and mean-field

Table hopfield_error(const Config& c) {
    const std::size_t n = c.count("N"), trials = c.count("trials");
    RandomStream rng(c.seed());
    Table t{{"alpha", "p", "p_mc", "p_formula", "stderr"}};
    for (double alpha : c.grid("alpha-grid")) {
        const auto p = static_cast<std::size_t>(std::llround(alpha * static_cast<double>(n)));
        if (p < 1) throw ConfigError("hopfield-error: alpha N must round to at least one pattern");
        const Estimate e = hopfield::one_step_error_mc(n, p, trials, rng);
        const double a = static_cast<double>(p) / static_cast<double>(n);
        t.add(a, p, e.value, hopfield::p_error_formula(a), e.std_error);
    }
    return t;
}

Table steady_error(const Config& c) {
    Table t{{"alpha", "p_one_step", "p_steady", "m1"}};
    for (double alpha : c.grid("alpha-grid")) {
        if (alpha <= 0.0) throw ConfigError("steady-error: alpha must be positive");
        const auto s = meanfield::solve_deterministic(alpha);
        t.add(alpha, hopfield::p_error_formula(alpha), s.p_error, s.m1);
    }
    t.note("alpha_c", meanfield::critical_capacity());
    return t;
}

Table phase_diagram(const Config& c) {
    const auto grid = c.grid("beta-inv-grid");
    Table t{{"beta_inv", "alpha_c"}};
    for (const auto& p : meanfield::phase_boundary_scan(grid)) t.add(p.beta_inv, p.alpha);
    t.note("alpha_c_zero_noise", meanfield::critical_capacity());
    return t;
}

Table mixed_order_parameter(const Config& c) {
    RandomStream rng(c.seed());
    const Estimate s = protocols::mixed_state_overlap(c.count("N"), c.count("trials"), rng);
    Table t{{"beta", "m_mixed", "m_single"}};
    for (double beta : c.grid("beta-grid")) t.add(beta, meanfield::solve_mixed_symmetric(beta), meanfield::solve_m1(beta));
    t.note("s_mean", s.value);
    t.note("s_stderr", s.std_error);
    return t;
}

// ---------------------------------------------------------------------------
// Annealing

anneal::Schedule schedule_from(const Config& c) {
    return {.beta0 = c.real("beta0"), .multiplier = c.real("multiplier"), .sweeps_per_stage = c.count("sweeps"),
            .stages = c.count("stages")};
}

Table anneal_tsp(const Config& c) {
    const std::string path = c.text("cities");
    const anneal::TspModel model(path.empty() ? anneal::seven_city_instance() : anneal::load_tsp(path));
    const std::size_t k = model.instance().size();
    const bool exhaustive = k <= 10;
    const auto oracle = exhaustive ? anneal::tsp_brute_force(model.instance()) : anneal::BruteForceTour{};
    RandomStream rng(c.seed());
    Table t{{"run", "length", "optimal_length", "optimal", "tour"}};
    std::size_t hits = 0;
    for (std::size_t run = 0; run < c.count("runs"); ++run) {
        const auto best = protocols::tsp_restarts(model, c.count("restarts"), schedule_from(c), rng);
        std::vector<std::string> names;
        for (std::size_t city : best.order) names.push_back(city_name(city, k));
        const bool optimal = exhaustive && std::abs(best.length - oracle.length) < 1e-9;
        hits += optimal;
        t.add(run, best.length, exhaustive ? oracle.length : std::numeric_limits<double>::quiet_NaN(), optimal,
              join(names, '-'));
    }
    if (exhaustive) t.note("optimal_runs", hits);
    return t;
}

Table anneal_queens(const Config& c) {
    const anneal::QueensModel model(c.count("k"));
    RandomStream rng(c.seed());
    Table t{{"run", "energy", "valid", "steps", "columns"}};
    for (std::size_t run = 0; run < c.count("runs"); ++run) {
        const auto r = anneal::anneal(model, model.random_configuration(rng), schedule_from(c), rng,
                                      {.target_energy = 0.0});
        t.add(run, r.best_energy, anneal::kqueens_valid(anneal::QueensModel::board(r.best)), r.steps,
              join_numbers(r.best, '-'));
    }
    return t;
}

Table anneal_digest(const Config& c) {
    const std::string path = c.text("instance");
    const auto instance = path.empty() ? anneal::digest_instance(static_cast<long>(c.count("L")))
                                       : anneal::load_digest(path);
    RandomStream rng(c.seed());
    const auto search = protocols::digest_restarts(instance, c.count("restarts"), schedule_from(c), rng);
    const auto exact = anneal::digest_solutions(instance);
    Table t{{"a_order", "b_order", "hits", "exhaustive"}};
    std::set<anneal::DigestOrdering> found;
    for (const auto& [o, hits] : search.found) {
        found.insert(o);
        t.add(join_numbers(o.a_order, ' '), join_numbers(o.b_order, ' '), hits, exact.contains(o));
    }
    t.note("restarts", search.restarts);
    t.note("restarts_at_zero", search.hits);
    t.note("best_energy", search.best_energy);
    t.note("orderings_found", found.size());
    t.note("orderings_exhaustive", exact.size());
    t.note("sets_equal", found == exact);
    return t;
}

// ---------------------------------------------------------------------------
// Feed-forward networks

ff::LabeledSet xor_blobs(std::size_t patterns, RandomStream& rng) {
    ff::LabeledSet d{Matrix(patterns, 2), Matrix(patterns, 1), ff::TargetConvention::zero_one};
    for (std::size_t mu = 0; mu < patterns; ++mu) {
        const double sx = rng.spin(), sy = rng.spin();
        d.inputs(mu, 0) = sx + rng.gaussian(0.0, 0.4);
        d.inputs(mu, 1) = sy + rng.gaussian(0.0, 0.4);
        d.targets(mu, 0) = sx != sy ? 1.0 : 0.0;
    }
    return d;
}

ff::Loss parse_loss(const std::string& name) {
    if (name == "quadratic") return ff::Loss::quadratic;
    if (name == "cross-entropy") return ff::Loss::cross_entropy_sigmoid;
    if (name == "loglikelihood") return ff::Loss::loglikelihood_softmax;
    throw ConfigError("loss must be quadratic, cross-entropy or loglikelihood");
}

ff::Activation parse_activation(const std::string& name) {
    if (name == "tanh") return ff::Activation::tanh;
    if (name == "sigmoid") return ff::Activation::sigmoid;
    if (name == "relu") return ff::Activation::relu;
    if (name == "identity") return ff::Activation::identity;
    throw ConfigError("activation must be tanh, sigmoid, relu or identity");
}

Table train_mlp(const Config& c) {
    RandomStream rng(c.seed());
    const std::string path = c.text("data");
    ff::LabeledSet all = path.empty() ? xor_blobs(c.count("patterns"), rng) : ff::load_labeled_set(path);
    all.validate();
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const auto n_valid = static_cast<std::size_t>(std::floor(c.real("validation") * static_cast<double>(all.size())));
    if (n_valid >= all.size()) throw ConfigError("validation fraction leaves no training data");
    const std::vector<std::size_t> valid_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_valid));
    const std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_valid), order.end());
    ff::LabeledSet train = all.subset(train_rows), valid = all.subset(valid_rows);
    if (c.flag("preprocess")) {
        const auto pre = ff::preprocess(train.inputs);
        train.inputs = pre.data;
        if (n_valid) valid.inputs = pre.transform.apply(valid.inputs);
    }

    const ff::Loss loss = parse_loss(c.text("loss"));
    ff::LayeredNet net(all.inputs.cols());
    for (double h : c.list("hidden")) {
        if (h < 1 || h != std::floor(h)) throw ConfigError("hidden sizes must be positive integers");
        net.add_dense(static_cast<std::size_t>(h), parse_activation(c.text("activation")));
    }
    const ff::Activation out = loss == ff::Loss::loglikelihood_softmax ? ff::Activation::softmax
                               : all.convention == ff::TargetConvention::plus_minus_one ? ff::Activation::tanh
                                                                                        : ff::Activation::sigmoid;
    net.add_dense(all.targets.cols(), out);

    ff::TrainConfig cfg;
    cfg.learning_rate = c.real("eta");
    cfg.momentum = c.real("momentum");
    cfg.nesterov = c.flag("nesterov");
    cfg.batch_size = c.count("batch");
    cfg.l1 = c.real("l1");
    cfg.l2 = c.real("l2");
    if (c.real("max-norm") > 0.0) cfg.max_norm = c.real("max-norm");
    cfg.keep_probability = c.real("keep");
    cfg.epochs = c.count("epochs");
    cfg.patience = c.count("patience") ? std::optional<std::size_t>(c.count("patience")) : std::nullopt;
    if (!n_valid) cfg.patience = std::nullopt;
    cfg.loss = loss;
    if (c.real("init-std") > 0.0) cfg.init_std = c.real("init-std");
    const auto log = ff::train(net, train, n_valid ? &valid : nullptr, cfg, rng);

    Table t{{"epoch", "h_train", "h_valid", "c_train", "c_valid"}};
    for (const auto& e : log.epochs) t.add(e.epoch, e.h_train, e.h_valid, e.c_train, e.c_valid);
    t.note("stopped_early", log.stopped_early);
    return t;
}

Table xor_pruning(const Config& c) {
    protocols::XorProtocol p;
    p.eta = c.real("eta");
    p.steps = c.count("steps");
    p.init_std = c.real("init-std");
    p.max_norm = c.real("max-norm");
    const std::string inputs = c.text("inputs");
    if (inputs != "pm1" && inputs != "01") throw ConfigError("inputs must be pm1 or 01");
    p.plus_minus_inputs = inputs == "pm1";
    p.prune_every = c.count("prune-every");
    p.prune_to = c.count("prune-to");
    const std::size_t seeds = c.count("seeds");
    Table t{{"protocol", "hidden", "success", "stderr"}};
    std::uint64_t stream = c.seed();
    for (double h : c.list("hidden")) {
        if (h < 1 || h != std::floor(h)) throw ConfigError("hidden sizes must be positive integers");
        const Estimate e = protocols::xor_success(static_cast<std::size_t>(h), p, seeds, stream++, false);
        t.add("trained", static_cast<std::size_t>(h), e.value, e.std_error);
    }
    const std::size_t from = c.count("prune-from");
    if (from > 0) {
        const Estimate e = protocols::xor_success(from, p, seeds, stream, true);
        t.add("pruned-" + std::to_string(from) + "-to-" + std::to_string(p.prune_to), p.prune_to, e.value,
              e.std_error);
    }
    return t;
}

Table gradient_audit(const Config& c) {
    RandomStream rng(c.seed());
    Table t{{"check", "instances", "max_rel_error", "tolerance", "pass"}};
    for (const auto& r : protocols::gradient_audit(c.count("instances"), rng))
        t.add(r.check, r.instances, r.max_error, r.tolerance, r.pass());
    return t;
}

// ---------------------------------------------------------------------------
// Unsupervised learning

Table oja(const Config& c) {
    const std::string data = c.text("data");
    us::Sampler sampler;
    Matrix moment;
    if (data == "three-point") {
        sampler = us::sample_rows(protocols::three_point_data());
        moment = us::second_moment(protocols::three_point_data());
    } else if (data == "gaussian") {
        const Vector var = c.list("variances");
        for (double v : var)
            if (v <= 0.0) throw ConfigError("variances must be positive");
        sampler = us::gaussian_sampler(var);
        moment = Matrix(var.size(), var.size());
        for (std::size_t i = 0; i < var.size(); ++i) moment(i, i) = var[i];
    } else {
        throw ConfigError("data must be three-point or gaussian");
    }
    const std::size_t dim = moment.rows();
    const us::OjaOptions opts{.eta = c.real("eta"), .steps = c.count("steps"), .divergence_norm = 10.0};
    std::vector<std::string> cols{"seed"};
    for (std::size_t j = 0; j < dim; ++j) cols.push_back("w" + std::to_string(j + 1));
    for (const char* s : {"norm", "angle_deg", "mean_y2", "lambda_max"}) cols.emplace_back(s);
    Table t{cols};
    std::size_t good = 0;
    const std::size_t seeds = c.count("seeds");
    // Same streams as acceptance criterion 10 for the default settings.
    const std::uint64_t base = c.seed() * 100 + (data == "gaussian" ? 50 : 0);
    for (std::size_t s = 0; s < seeds; ++s) {
        RandomStream rng(base + s);
        const Vector w = us::oja_train(sampler, dim, opts, rng);
        const auto d = us::oja_diagnostics(w, moment);
        std::vector<std::string> row{Table::cell(s)};
        for (double x : w) row.push_back(Table::cell(x));
        for (double x : {d.norm, d.angle_deg, d.mean_y2, d.lambda_max}) row.push_back(Table::cell(x));
        t.add_row(row);
        good += std::abs(d.norm - 1.0) < 1e-2 && d.angle_deg < 1.0;
    }
    t.note("converged_seeds", good);
    return t;
}

Table sanger(const Config& c) {
    const Vector var = c.list("variances");
    const std::size_t units = c.count("units"), dim = var.size();
    if (units < 1 || units > dim) throw ConfigError("units must lie in 1..dimension");
    const std::string rule = c.text("rule");
    if (rule != "sanger" && rule != "oja-m") throw ConfigError("rule must be sanger or oja-m");
    RandomStream rng(c.seed());
    const auto sampler = us::gaussian_sampler(var);
    us::LinearUnitBank bank = us::random_unit_bank(units, dim, rng);
    auto stage = [&](double eta, std::size_t steps) {
        for (std::size_t k = 0; k < steps; ++k) {
            const Vector xi = sampler(rng);
            rule == "sanger" ? us::sanger_step(bank, xi, eta) : us::oja_m_step(bank, xi, eta);
        }
    };
    stage(c.real("eta"), c.count("steps"));
    stage(c.real("eta-final"), c.count("steps-final"));
    // Eigenvectors of a diagonal covariance are the axes, by decreasing variance.
    std::vector<std::size_t> axes(dim);
    std::iota(axes.begin(), axes.end(), 0);
    std::stable_sort(axes.begin(), axes.end(), [&](std::size_t a, std::size_t b) { return var[a] > var[b]; });
    std::vector<std::string> cols{"unit", "axis", "angle_deg", "norm"};
    for (std::size_t j = 0; j < dim; ++j) cols.push_back("w" + std::to_string(j + 1));
    Table t{cols};
    for (std::size_t i = 0; i < units; ++i) {
        const auto w = bank.weights.row(i);
        const double n = norm(w);
        const double cosine = std::min(1.0, std::abs(w[axes[i]]) / n);
        std::vector<std::string> row{Table::cell(i + 1), Table::cell(axes[i] + 1),
                                     Table::cell(std::acos(cosine) * 180.0 / std::acos(-1.0)), Table::cell(n)};
        for (double x : w) row.push_back(Table::cell(x));
        t.add_row(row);
    }
    t.note("orthonormality_defect", us::orthonormality_defect(bank));
    return t;
}

Table kohonen_density(const Config& c) {
    const auto density = protocols::parse_density(c.text("density"));
    RandomStream rng(c.seed());
    us::SelfOrganizingMap map = us::SelfOrganizingMap::line(c.count("units"), 1);
    const auto sampler = protocols::density_sampler(density);
    us::initialize_from_samples(map, sampler, rng);
    us::kohonen_train(map, sampler, us::KohonenSchedule::standard(map), rng);
    const auto fit = us::kohonen_density_exponent(
        map, [density](double w) { return protocols::density_value(density, w); }, c.real("edge"));
    Table t{{"w", "rho_hat", "P"}};
    for (const auto& p : fit.points) t.add(p.w, p.rho_hat, p.p);
    t.note("exponent", fit.exponent);
    t.note("expected_exponent", protocols::kohonen_exponent);
    t.note("flat_density", fit.flat);
    return t;
}

Table kohonen_map(const Config& c) {
    const std::string shape = c.text("shape");
    us::Sampler sampler;
    if (shape == "parallelogram") {
        sampler = us::parallelogram_sampler();
    } else if (shape == "square") {
        sampler = [](RandomStream& r) { return Vector{r.uniform(), r.uniform()}; };
    } else {
        throw ConfigError("shape must be parallelogram or square");
    }
    RandomStream rng(c.seed());
    us::SelfOrganizingMap map = us::SelfOrganizingMap::grid(c.count("rows"), c.count("cols"), 2);
    us::initialize_from_samples(map, sampler, rng);
    auto schedule = us::KohonenSchedule::standard(map);
    schedule.ordering.steps = c.count("ordering-steps");
    schedule.convergence.steps = c.count("convergence-steps");
    const auto trace = us::kohonen_train(map, sampler, schedule, rng);
    Table t{{"r1", "r2", "w1", "w2"}};
    for (std::size_t i = 0; i < map.units(); ++i)
        t.add(map.coordinates(i, 0), map.coordinates(i, 1), map.weights(i, 0), map.weights(i, 1));
    t.note("crossings", us::count_crossings(map));
    if (!trace.records.empty()) t.note("final_energy", trace.records.back().energy);
    return t;
}

// ---------------------------------------------------------------------------
// Radial basis functions and reinforcement

Table cover(const Config& c) {
    const std::size_t m_max = c.count("m-max"), p_max = c.count("p-max");
    if (m_max < 1 || p_max < 1) throw ConfigError("m-max and p-max must be positive");
    Table t{{"m", "p", "lambda", "P"}};
    double worst = 0.0;
    for (std::size_t m = 1; m <= m_max; ++m) {
        for (std::size_t p = 1; p <= p_max; ++p)
            t.add(m, p, static_cast<double>(p) / static_cast<double>(m), rbf::cover_probability(p, m));
        worst = std::max(worst, std::abs(rbf::expected_max_separable(m).mean - 2.0 * static_cast<double>(m)));
    }
    RandomStream rng(c.seed());
    const Estimate mc = rbf::separability_mc(c.count("mc-p"), c.count("mc-m"), c.count("mc-trials"), rng);
    t.note("max_abs_mean_n_minus_2m", worst);
    t.note("mc_separable", mc.value);
    t.note("mc_stderr", mc.std_error);
    t.note("mc_exact", rbf::cover_probability(c.count("mc-p"), c.count("mc-m")));
    return t;
}

Table rbf_xor(const Config& c) {
    const auto data = rbf::xor_data(ff::TargetConvention::plus_minus_one);
    RandomStream rng(c.seed());
    rbf::RbfOptions opts{.centers = 2, .init = rbf::CenterInit::uniform, .eta_centers = c.real("eta-centers"),
                         .center_steps = c.count("center-steps"), .fit = rbf::OutputFit::gradient,
                         .eta_output = c.real("eta"), .output_steps = c.count("steps"),
                         .fit_threshold = c.flag("threshold")};
    rbf::RbfTraining r;
    const std::string centres = c.text("centers");
    if (centres == "fixed") {
        const rbf::RbfNetwork net{Matrix{{1.0, 1.0}, {0.0, 0.0}}, Vector(2, 1.0 / std::sqrt(2.0)), Vector(2, 0.0),
                                  0.0};
        r = rbf::fit_output(net, data, opts, rng);
    } else if (centres == "trained") {
        opts.centers = c.count("units");
        opts.init = rbf::CenterInit::patterns;
        r = rbf::rbf_train(data, opts, rng);
    } else {
        throw ConfigError("centers must be fixed or trained");
    }
    std::vector<std::string> cols{"x1", "x2"};
    for (std::size_t j = 0; j < r.net.size(); ++j) cols.push_back("u" + std::to_string(j + 1));
    for (const char* s : {"target", "output", "correct"}) cols.emplace_back(s);
    Table t{cols};
    for (std::size_t mu = 0; mu < data.size(); ++mu) {
        const auto x = data.inputs.row(mu);
        std::vector<std::string> row{Table::cell(x[0]), Table::cell(x[1])};
        for (double u : rbf::rbf_embed(r.net, x)) row.push_back(Table::cell(u));
        const double o = rbf::rbf_output(r.net, x);
        row.push_back(Table::cell(data.targets(mu, 0)));
        row.push_back(Table::cell(o));
        row.push_back(Table::cell((o >= 0.0 ? 1.0 : -1.0) == data.targets(mu, 0)));
        t.add_row(row);
    }
    for (std::size_t j = 0; j < r.net.size(); ++j) t.note("W" + std::to_string(j + 1), r.net.weights[j]);
    t.note("threshold", r.net.threshold);
    t.note("energy", r.energy);
    t.note("classification_error",
           ff::classification_error(rbf::rbf_outputs(r.net, data.inputs), data.targets, data.convention));
    return t;
}

Table arp_toy(const Config& c) {
    const std::string form = c.text("form");
    if (form != "plain" && form != "with-gain") throw ConfigError("form must be plain or with-gain");
    Table t{{"seed", "reward_first", "reward_last", "error"}};
    std::size_t solved = 0;
    const std::size_t seeds = c.count("seeds");
    for (std::size_t s = 0; s < seeds; ++s) {
        RandomStream rng(c.seed() * 1000 + s);
        const auto toy = reinforce::separable_toy(c.count("patterns"), c.count("dimension"), c.real("margin"), rng);
        reinforce::StochasticOutputLayer layer{Matrix(1, toy.inputs.cols()), c.real("beta"), c.real("eta-plus"),
                                               c.real("eta-minus"),
                                               form == "plain" ? reinforce::ErrorForm::plain
                                                               : reinforce::ErrorForm::with_gain};
        const auto trace = reinforce::arp_train(layer, toy.inputs, reinforce::exact_match_environment(toy.targets),
                                                {c.count("steps"), c.count("window")}, rng);
        const double err = reinforce::classification_error(layer, toy.inputs, toy.targets);
        solved += err == 0.0;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        t.add(s, trace.reward_rate.empty() ? nan : trace.reward_rate.front(),
              trace.reward_rate.empty() ? nan : trace.reward_rate.back(), err);
    }
    t.note("solved_seeds", solved);
    return t;
}

Table acceptance_table(const Config& c) {
    const std::string which = c.text("criteria");
    std::vector<int> ids;
    if (which == "all") {
        for (int i = 1; i <= acceptance::criterion_count; ++i) ids.push_back(i);
    } else {
        for (double x : parse_list(which)) {
            if (x < 1 || x > acceptance::criterion_count || x != std::floor(x))
                throw ConfigError("criteria must be 'all' or numbers in 1..14");
            ids.push_back(static_cast<int>(x));
        }
    }
    Table t{{"criterion", "pass", "known_gap", "detail"}};
    for (int id : ids) {
        const auto r = acceptance::check(id, c.seed());
        t.add(id, r.pass, r.known_gap, r.detail);
    }
    return t;
}

std::vector<Experiment> build() {
    return {
        {"hopfield-error", "one-step error probability: Monte Carlo against the erf formula",
         {{"alpha-grid", "0.05:0.30:0.05", "storage loads p/N"}, {"N", "1000", "neurons"},
          {"trials", "10000", "cross-talk draws per load"}},
         hopfield_error, {1, 14}},
        {"steady-error", "one-step against steady-state error probability (deterministic limit)",
         {{"alpha-grid", "0.005:0.16:0.005", "storage loads"}}, steady_error, {4}},
        {"phase-diagram", "critical storage load against noise level",
         {{"beta-inv-grid", "0.05:1.0:0.05", "noise levels 1/beta in (0, 1]"}}, phase_diagram, {2, 3}},
        {"mixed-order-parameter", "mixed-state overlaps and the symmetric mixed mean-field root",
         {{"N", "12", "bits per pattern"}, {"trials", "4000", "random pattern triples"},
          {"beta-grid", "0.5:3.0:0.1", "inverse temperatures"}},
         mixed_order_parameter, {13}},
        {"anneal-tsp", "simulated annealing on a travelling-salesman instance",
         {{"cities", "", "TSP file; empty for the seven-city example"}, {"runs", "10", "independent runs"},
          {"restarts", "20", "annealing restarts per run"}, {"beta0", "0.5", "initial beta"},
          {"multiplier", "1.1", "beta multiplier per stage"}, {"sweeps", "100", "sweeps per stage"},
          {"stages", "50", "stages"}},
         anneal_tsp, {5, 6}},
        {"anneal-queens", "simulated annealing on k queens",
         {{"k", "8", "board size"}, {"runs", "10", "independent runs"}, {"beta0", "0.5", "initial beta"},
          {"multiplier", "1.2", "beta multiplier per stage"}, {"sweeps", "200", "sweeps per stage"},
          {"stages", "30", "stages"}},
         anneal_queens, {}},
        {"anneal-digest", "double-digest restarts against exhaustive enumeration",
         {{"instance", "", "digest file; empty for the built-in instance of length L"},
          {"L", "10000", "built-in instance length (10000, 20000 or 40000)"},
          {"restarts", "1000", "annealing restarts"}, {"beta0", "0.001", "initial beta"},
          {"multiplier", "1.1", "beta multiplier per stage"}, {"sweeps", "1000", "sweeps per stage"},
          {"stages", "50", "stages"}},
         anneal_digest, {7}},
        {"train-mlp", "minibatch training of a layered net with validation monitoring",
         {{"data", "", "labeled-set file; empty for generated XOR blobs"},
          {"patterns", "400", "generated patterns"}, {"validation", "0.25", "validation fraction"},
          {"preprocess", "true", "standardise inputs"}, {"hidden", "8", "hidden layer sizes, comma separated"},
          {"activation", "tanh", "hidden activation"}, {"loss", "cross-entropy", "quadratic, cross-entropy, loglikelihood"},
          {"eta", "0.05", "learning rate"}, {"momentum", "0", "momentum"}, {"nesterov", "false", "Nesterov momentum"},
          {"batch", "10", "minibatch size"}, {"epochs", "200", "epoch cap"}, {"l1", "0", "L1 penalty"},
          {"l2", "0", "L2 penalty"}, {"max-norm", "0", "weight clip, 0 for none"},
          {"keep", "1", "dropout keep probability"}, {"patience", "0", "early-stopping patience, 0 for none"},
          {"init-std", "0", "initial weight std, 0 for 1/sqrt(fan-in)"}},
         train_mlp, {}},
        {"xor-pruning", "XOR training success by hidden-layer size, with and without pruning",
         {{"seeds", "1000", "trials per row"}, {"hidden", "2,4,6,8,10", "hidden sizes trained directly"},
          {"eta", "0.1", "learning rate"}, {"steps", "10000", "single-pattern updates"},
          {"init-std", "0.1", "initial weight std"}, {"max-norm", "2", "weight clip"},
          {"inputs", "pm1", "pm1 or 01"}, {"prune-from", "10", "starting size of the pruned row, 0 to skip"},
          {"prune-to", "2", "final size after pruning"}, {"prune-every", "1000", "steps between removals"}},
         xor_pruning, {9}},
        {"gradient-audit", "backprop against central differences for every layer and loss",
         {{"instances", "50", "random cases per check"}}, gradient_audit, {8}},
        {"oja", "Oja's rule against the principal eigenvector",
         {{"data", "three-point", "three-point or gaussian"}, {"variances", "4,1", "gaussian component variances"},
          {"eta", "5e-5", "learning rate"}, {"steps", "400000", "updates"}, {"seeds", "10", "independent runs"}},
         oja, {10}},
        {"sanger", "Sanger's rule (or Oja's M-unit rule) on Gaussian data",
         {{"variances", "4,1,0.25", "component variances"}, {"units", "2", "output units"},
          {"rule", "sanger", "sanger or oja-m"}, {"eta", "5e-4", "first-stage rate"},
          {"steps", "200000", "first-stage updates"}, {"eta-final", "2e-5", "second-stage rate"},
          {"steps-final", "200000", "second-stage updates"}},
         sanger, {}},
        {"kohonen-density", "1-D Kohonen map density law",
         {{"units", "200", "map units"}, {"density", "ramp", "ramp, uniform or quadratic"},
          {"edge", "0.1", "fraction of units left out at each end"}},
         kohonen_density, {11}},
        {"kohonen-map", "2-D Kohonen map on a planar region",
         {{"rows", "8", "grid rows"}, {"cols", "8", "grid columns"}, {"shape", "parallelogram", "parallelogram or square"},
          {"ordering-steps", "10000", "ordering-phase draws"}, {"convergence-steps", "100000", "convergence-phase draws"}},
         kohonen_map, {}},
        {"cover", "Cover's separability probability, exact and Monte Carlo",
         {{"m-max", "10", "largest dimension"}, {"p-max", "40", "largest pattern count"},
          {"mc-p", "8", "Monte-Carlo patterns"}, {"mc-m", "4", "Monte-Carlo dimension"},
          {"mc-trials", "2000", "Monte-Carlo problems"}},
         cover, {12}},
        {"rbf-xor", "XOR through two radial basis functions",
         {{"centers", "fixed", "fixed at (1,1), (0,0) or trained by competitive learning"},
          {"units", "2", "centres when trained"}, {"threshold", "true", "fit an output threshold"},
          {"eta", "0.05", "output learning rate"}, {"steps", "50000", "output updates"},
          {"eta-centers", "0.05", "centre learning rate"}, {"center-steps", "10000", "centre updates"}},
         rbf_xor, {}},
        {"arp-toy", "associative reward-penalty on a separable single-output task",
         {{"seeds", "10", "independent runs"}, {"patterns", "40", "patterns"}, {"dimension", "2", "inputs before bias"},
          {"margin", "0.2", "teacher margin"}, {"beta", "1", "noise parameter"}, {"eta-plus", "0.1", "reward rate"},
          {"eta-minus", "0.01", "penalty rate"}, {"steps", "20000", "updates"}, {"window", "1000", "reward-rate window"},
          {"form", "plain", "plain or with-gain"}},
         arp_toy, {}},
        {"acceptance", "all acceptance criteria as a table",
         {{"criteria", "all", "'all' or comma-separated criterion numbers"}}, acceptance_table, {}},
    };
}

}  // namespace

const std::vector<Experiment>& experiments() {
    static const std::vector<Experiment> registry = build();
    return registry;
}

}  // namespace neuro::harness
