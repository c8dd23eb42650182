#include "neuro/reinforce.hpp"

#include <cmath>
#include <stdexcept>

namespace neuro::reinforce {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void StochasticOutputLayer::validate() const {
    require(beta > 0.0, "stochastic layer: beta must be positive");
    require(eta_minus > 0.0 && eta_plus >= eta_minus, "stochastic layer: need eta_plus >= eta_minus > 0");
}

double fire_probability(double beta, double b) {
    if (b == 0.0) return 0.5;
    return 1.0 / (1.0 + std::exp(-2.0 * beta * b));
}

double mean_output(double beta, double b) {
    if (b == 0.0) return 0.0;
    return std::tanh(beta * b);
}

Vector local_fields(const StochasticOutputLayer& layer, std::span<const double> v) {
    require(v.size() == layer.inputs(), "local_fields: input dimension mismatch");
    return layer.weights * v;
}

Vector mean_outputs(const StochasticOutputLayer& layer, std::span<const double> v) {
    Vector m = local_fields(layer, v);
    for (double& x : m) x = mean_output(layer.beta, x);
    return m;
}

Vector stochastic_output(const StochasticOutputLayer& layer, std::span<const double> v, RandomStream& rng) {
    Vector o = local_fields(layer, v);
    for (double& x : o) x = rng.uniform() < fire_probability(layer.beta, x) ? 1.0 : -1.0;
    return o;
}

Vector effective_targets(std::span<const double> o, int r) {
    require(r == 1 || r == -1, "effective_targets: r must be +1 or -1");
    Vector t(o.begin(), o.end());
    if (r == -1)
        for (double& x : t) x = -x;
    return t;
}

Vector output_errors(const StochasticOutputLayer& layer, std::span<const double> v, std::span<const double> t) {
    require(t.size() == layer.outputs(), "output_errors: one target per output");
    Vector d = mean_outputs(layer, v);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double m = d[i];
        d[i] = t[i] - m;
        if (layer.form == ErrorForm::with_gain) d[i] *= layer.beta * (1.0 - m * m);
    }
    return d;
}

Matrix supervised_increment(const StochasticOutputLayer& layer, std::span<const double> v,
                            std::span<const double> t, double eta) {
    const Vector d = output_errors(layer, v, t);
    Matrix dw(layer.outputs(), layer.inputs());
    for (std::size_t i = 0; i < dw.rows(); ++i)
        for (std::size_t j = 0; j < dw.cols(); ++j) dw(i, j) = eta * d[i] * v[j];
    return dw;
}

Matrix arp_increment(const StochasticOutputLayer& layer, std::span<const double> v, std::span<const double> o,
                     int r) {
    require(r == 1 || r == -1, "arp_increment: r must be +1 or -1");
    require(o.size() == layer.outputs(), "arp_increment: one output per unit");
    return supervised_increment(layer, v, effective_targets(o, r), r == 1 ? layer.eta_plus : layer.eta_minus);
}

void apply_increment(StochasticOutputLayer& layer, const Matrix& dw) {
    require(dw.rows() == layer.outputs() && dw.cols() == layer.inputs(), "apply_increment: shape mismatch");
    auto w = layer.weights.data();
    const auto d = dw.data();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] += d[k];
}

double mean_energy(const StochasticOutputLayer& layer, const Matrix& inputs, const Matrix& targets) {
    require(inputs.rows() == targets.rows() && targets.cols() == layer.outputs(), "mean_energy: shape mismatch");
    double h = 0.0;
    for (std::size_t mu = 0; mu < inputs.rows(); ++mu) {
        const Vector m = mean_outputs(layer, inputs.row(mu));
        for (std::size_t i = 0; i < m.size(); ++i) h += 1.0 - targets(mu, i) * m[i];
    }
    return h;
}

double mean_energy_change(const StochasticOutputLayer& layer, std::span<const double> v,
                          std::span<const double> t, double eta) {
    require(t.size() == layer.outputs(), "mean_energy_change: one target per output");
    const Vector m = mean_outputs(layer, v);
    const double v2 = dot(v, v);
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double gain = 1.0 - m[i] * m[i];
        s += gain * gain * (1.0 - t[i] * m[i]);
    }
    return -eta * layer.beta * layer.beta * s * v2;
}

Environment exact_match_environment(const Matrix& targets) {
    return [targets](std::size_t mu, std::span<const double> o) {
        for (std::size_t i = 0; i < o.size(); ++i)
            if (o[i] != targets(mu, i)) return -1;
        return 1;
    };
}

ArpTrace arp_train(StochasticOutputLayer& layer, const Matrix& inputs, const Environment& environment,
                   const ArpOptions& options, RandomStream& rng) {
    layer.validate();
    require(inputs.rows() > 0 && inputs.cols() == layer.inputs(), "arp_train: inputs do not match layer");
    const std::size_t window = options.monitor_window ? options.monitor_window : options.steps;
    ArpTrace trace;
    std::size_t rewards = 0, seen = 0;
    for (std::size_t step = 0; step < options.steps; ++step) {
        const std::size_t mu = rng.uniform_index(inputs.rows());
        const auto v = inputs.row(mu);
        const Vector o = stochastic_output(layer, v, rng);
        const int r = environment(mu, o);
        apply_increment(layer, arp_increment(layer, v, o, r));
        rewards += r == 1;
        if (++seen == window) {
            trace.reward_rate.push_back(static_cast<double>(rewards) / static_cast<double>(seen));
            rewards = seen = 0;
        }
    }
    return trace;
}

double classification_error(const StochasticOutputLayer& layer, const Matrix& inputs, const Matrix& targets) {
    require(inputs.rows() == targets.rows() && targets.cols() == layer.outputs(),
            "classification_error: shape mismatch");
    std::size_t wrong = 0;
    for (std::size_t mu = 0; mu < inputs.rows(); ++mu) {
        const Vector b = local_fields(layer, inputs.row(mu));
        for (std::size_t i = 0; i < b.size(); ++i)
            if (b[i] * targets(mu, i) <= 0.0) {
                ++wrong;
                break;
            }
    }
    return static_cast<double>(wrong) / static_cast<double>(inputs.rows());
}

SeparableToy separable_toy(std::size_t patterns, std::size_t dimension, double margin, RandomStream& rng) {
    require(patterns >= 1 && dimension >= 1 && margin >= 0.0, "separable_toy: bad arguments");
    Vector teacher(dimension + 1);
    for (double& w : teacher) w = rng.gaussian();
    const double scale = norm(teacher);
    for (double& w : teacher) w /= scale;
    SeparableToy toy{Matrix(patterns, dimension + 1), Matrix(patterns, 1)};
    for (std::size_t mu = 0; mu < patterns; ++mu) {
        auto row = toy.inputs.row(mu);
        double b = 0.0;
        do {
            for (std::size_t j = 0; j < dimension; ++j) row[j] = rng.gaussian();
            row[dimension] = 1.0;
            b = dot(teacher, row);
        } while (std::abs(b) < margin);
        toy.targets(mu, 0) = b > 0.0 ? 1.0 : -1.0;
    }
    return toy;
}

}  // namespace neuro::reinforce
