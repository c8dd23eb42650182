#include "neuro/rbf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace neuro::rbf {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return s;
}

double energy_of(const RbfNetwork& net, const feedforward::LabeledSet& data) {
    double h = 0.0;
    for (std::size_t mu = 0; mu < data.size(); ++mu) {
        const double e = data.targets(mu, 0) - rbf_output(net, data.inputs.row(mu));
        h += 0.5 * e * e;
    }
    return h;
}

}  // namespace

std::uint64_t cover_count(std::size_t p, std::size_t m) {
    require(p >= 1 && m >= 1, "cover_count: need p, m >= 1");
    require(p <= 64, "cover_count: exact only for p <= 64");
    const std::size_t n = p - 1;
    std::uint64_t term = 1, sum = 0;  // term = C(n, k)
    for (std::size_t k = 0; k < m && k <= n; ++k) {
        sum += term;
        // C(n, k+1) = C(n, k) (n - k) / (k + 1); the product fits for n <= 63.
        term = term / (k + 1) * (n - k) + term % (k + 1) * (n - k) / (k + 1);
    }
    return sum;
}

double cover_probability(std::size_t p, std::size_t m) {
    require(p >= 1 && m >= 1, "cover_probability: need p, m >= 1");
    if (p <= m) return 1.0;
    if (p <= 64) return std::ldexp(static_cast<double>(cover_count(p, m)), -static_cast<int>(p - 1));
    const std::size_t n = p - 1;
    long double term = std::pow(0.5L, static_cast<long double>(n));
    require(term > 0.0L, "cover_probability: p too large");
    long double sum = 0.0L;
    for (std::size_t k = 0; k < m && k <= n; ++k) {
        sum += term;
        term = term * static_cast<long double>(n - k) / static_cast<long double>(k + 1);
    }
    return static_cast<double>(std::min(sum, 1.0L));
}

MaxSeparable expected_max_separable(std::size_t m, double cutoff) {
    require(m >= 1, "expected_max_separable: need m >= 1");
    MaxSeparable r;
    // p_n = 0 for n < m, p_m = 2^-m, p_{n+1} = p_n n / (2 (n - m + 1)).
    long double pn = std::pow(0.5L, static_cast<long double>(m));
    long double mean = 0.0L, mass = 0.0L;
    bool past_peak = false;
    for (std::size_t n = m;; ++n) {
        mean += static_cast<long double>(n) * pn;
        mass += pn;
        ++r.terms;
        const long double next = pn * static_cast<long double>(n) / (2.0L * static_cast<long double>(n - m + 1));
        if (next < pn) past_peak = true;
        if (past_peak && next < cutoff) break;
        pn = next;
    }
    r.mean = static_cast<double>(mean);
    r.mass = static_cast<double>(mass);
    return r;
}

bool perceptron_separates(const Matrix& points, std::span<const double> targets, std::size_t update_cap) {
    require(points.rows() == targets.size(), "perceptron_separates: one target per point");
    Vector w(points.cols(), 0.0);
    std::size_t updates = 0;
    for (;;) {
        bool clean = true;
        for (std::size_t mu = 0; mu < points.rows(); ++mu) {
            const auto u = points.row(mu);
            if (targets[mu] * dot(w, u) > 0.0) continue;
            if (updates++ == update_cap) return false;
            for (std::size_t j = 0; j < w.size(); ++j) w[j] += targets[mu] * u[j];
            clean = false;
        }
        if (clean) return true;
    }
}

Estimate separability_mc(std::size_t p, std::size_t m, std::size_t trials, RandomStream& rng,
                         std::size_t update_cap) {
    require(p >= 1 && m >= 1 && trials >= 1, "separability_mc: need p, m, trials >= 1");
    const std::size_t cap = update_cap ? update_cap : 10000 * p;
    std::size_t separable = 0;
    Matrix points(p, m);
    Vector targets(p);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        for (std::size_t mu = 0; mu < p; ++mu) {
            auto row = points.row(mu);
            double len = 0.0;
            while (len == 0.0) {
                for (double& x : row) x = rng.gaussian();
                len = norm(row);
            }
            const double radius = std::pow(rng.uniform(), 1.0 / static_cast<double>(m));
            for (double& x : row) x *= radius / len;
            targets[mu] = rng.spin();
        }
        separable += perceptron_separates(points, targets, cap);
    }
    return binomial_estimate(separable, trials);
}

void RbfNetwork::validate() const {
    require(widths.size() == size() && weights.size() == size(), "rbf net: one width and weight per centre");
    for (double s : widths) require(s > 0.0 && std::isfinite(s), "rbf net: widths must be positive");
}

Vector rbf_embed(const RbfNetwork& net, std::span<const double> xi) {
    require(xi.size() == net.input_dimension(), "rbf_embed: input dimension mismatch");
    Vector u(net.size());
    for (std::size_t j = 0; j < u.size(); ++j) {
        require(net.widths[j] > 0.0, "rbf_embed: widths must be positive");
        u[j] = std::exp(-squared_distance(xi, net.centers.row(j)) / (2.0 * net.widths[j] * net.widths[j]));
    }
    return u;
}

double rbf_output(const RbfNetwork& net, std::span<const double> xi) {
    return dot(net.weights, rbf_embed(net, xi)) - net.threshold;
}

Matrix rbf_outputs(const RbfNetwork& net, const Matrix& inputs) {
    Matrix out(inputs.rows(), 1);
    for (std::size_t mu = 0; mu < inputs.rows(); ++mu) out(mu, 0) = rbf_output(net, inputs.row(mu));
    return out;
}

Matrix design_matrix(const RbfNetwork& net, const Matrix& inputs) {
    Matrix u(inputs.rows(), net.size());
    for (std::size_t mu = 0; mu < inputs.rows(); ++mu) {
        const Vector row = rbf_embed(net, inputs.row(mu));
        std::copy(row.begin(), row.end(), u.row(mu).begin());
    }
    return u;
}

void update_widths(RbfNetwork& net) {
    const std::size_t m = net.size();
    if (m < 2) return;
    for (std::size_t j = 0; j < m; ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < m; ++k)
            if (k != j) best = std::min(best, squared_distance(net.centers.row(j), net.centers.row(k)));
        if (best > 0.0) net.widths[j] = std::sqrt(best);
    }
}

RbfTraining fit_output(RbfNetwork net, const feedforward::LabeledSet& data, const RbfOptions& options,
                       RandomStream& rng) {
    net.validate();
    require(data.size() > 0 && data.inputs.cols() == net.input_dimension(), "fit_output: data does not match net");
    const std::size_t m = net.size(), p = data.size();
    const std::size_t unknowns = m + (options.fit_threshold ? 1 : 0);
    RbfTraining result;
    bool want_exact = options.fit == OutputFit::exact || (options.fit == OutputFit::automatic && unknowns == p);
    if (want_exact && unknowns != p) {
        result.diagnostic = "exact fit needs as many unknowns as patterns; using gradient descent";
        want_exact = false;
    }
    if (want_exact) {
        Matrix u(p, unknowns);
        const Matrix base = design_matrix(net, data.inputs);
        Vector t(p);
        for (std::size_t mu = 0; mu < p; ++mu) {
            for (std::size_t j = 0; j < m; ++j) u(mu, j) = base(mu, j);
            if (options.fit_threshold) u(mu, m) = -1.0;
            t[mu] = data.targets(mu, 0);
        }
        try {
            const Vector w = solve_linear(u, t);
            std::copy(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(m), net.weights.begin());
            net.threshold = options.fit_threshold ? w[m] : 0.0;
            result.exact = true;
        } catch (const SingularMatrixError&) {
            result.diagnostic = "U is singular; using gradient descent";
        }
    }
    if (!result.exact) {
        require(options.eta_output > 0.0, "fit_output: eta_output must be positive");
        const Matrix u = design_matrix(net, data.inputs);
        for (std::size_t step = 0; step < options.output_steps; ++step) {
            const std::size_t mu = rng.uniform_index(p);
            const double err = data.targets(mu, 0) - (dot(net.weights, u.row(mu)) - net.threshold);
            for (std::size_t j = 0; j < m; ++j) net.weights[j] += options.eta_output * err * u(mu, j);
            if (options.fit_threshold) net.threshold -= options.eta_output * err;
        }
    }
    result.energy = energy_of(net, data);
    result.net = std::move(net);
    return result;
}

RbfTraining rbf_train(const feedforward::LabeledSet& data, const RbfOptions& options, RandomStream& rng) {
    require(options.centers >= 1, "rbf_train: need at least one centre");
    require(data.size() > 0 && data.targets.cols() >= 1, "rbf_train: empty data set");
    const std::size_t m = options.centers, n = data.inputs.cols(), p = data.size();
    RbfNetwork net{Matrix(m, n), Vector(m, 1.0), Vector(m, 0.0), 0.0};
    if (options.init == CenterInit::patterns) {
        require(m <= p, "rbf_train: more centres than patterns");
        std::vector<std::size_t> order(p);
        for (std::size_t mu = 0; mu < p; ++mu) order[mu] = mu;
        if (m < p) rng.shuffle(order);
        for (std::size_t j = 0; j < m; ++j)
            std::copy(data.inputs.row(order[j]).begin(), data.inputs.row(order[j]).end(), net.centers.row(j).begin());
    } else {
        for (double& w : net.centers.data()) w = rng.uniform(-1.0, 1.0);
    }
    update_widths(net);
    for (std::size_t t = 0; t < options.center_steps; ++t) {
        const auto xi = data.inputs.row(rng.uniform_index(p));
        const Vector u = rbf_embed(net, xi);
        const std::size_t j0 = static_cast<std::size_t>(std::max_element(u.begin(), u.end()) - u.begin());
        update_widths(net);
        auto w = net.centers.row(j0);
        for (std::size_t k = 0; k < n; ++k) w[k] += options.eta_centers * (xi[k] - w[k]);
    }
    update_widths(net);
    return fit_output(std::move(net), data, options, rng);
}

feedforward::LabeledSet xor_data(feedforward::TargetConvention convention) {
    require(convention != feedforward::TargetConvention::one_hot, "xor_data: one-hot targets not supported");
    const double off = convention == feedforward::TargetConvention::zero_one ? 0.0 : -1.0;
    return {Matrix{{0.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}, {1.0, 1.0}}, Matrix{{off}, {1.0}, {1.0}, {off}}, convention};
}

}  // namespace neuro::rbf
