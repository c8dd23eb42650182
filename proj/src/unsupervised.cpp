#include "neuro/unsupervised.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace neuro::unsupervised {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return s;
}

Vector random_unit_vector(std::size_t n, RandomStream& rng) {
    Vector w(n);
    double len = 0.0;
    while (len == 0.0) {
        for (double& x : w) x = rng.gaussian();
        len = norm(w);
    }
    for (double& x : w) x /= len;
    return w;
}

// Increment with the decay sum running over units 0..last(i).
template <typename Last>
Matrix generalized_oja(const LinearUnitBank& bank, std::span<const double> xi, double eta, Last last) {
    require(xi.size() == bank.dimension(), "pattern dimension does not match the bank");
    const Vector y = bank.outputs(xi);
    const std::size_t m = bank.units(), n = bank.dimension();
    Matrix d(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t upto = last(i);
        for (std::size_t j = 0; j < n; ++j) {
            double s = xi[j];
            for (std::size_t k = 0; k <= upto; ++k) s -= y[k] * bank.weights(k, j);
            d(i, j) = eta * y[i] * s;
        }
    }
    return d;
}

void add_into(Matrix& w, const Matrix& d) {
    for (std::size_t k = 0; k < w.size(); ++k) w.data()[k] += d.data()[k];
}

}  // namespace

Sampler sample_rows(const Matrix& data) {
    require(data.rows() > 0, "sample_rows: empty data set");
    return [data](RandomStream& rng) {
        const auto row = data.row(rng.uniform_index(data.rows()));
        return Vector(row.begin(), row.end());
    };
}

Sampler gaussian_sampler(std::span<const double> variances) {
    Vector sd;
    for (double v : variances) {
        require(v >= 0.0, "gaussian_sampler: negative variance");
        sd.push_back(std::sqrt(v));
    }
    return [sd](RandomStream& rng) {
        Vector x(sd.size());
        for (std::size_t j = 0; j < sd.size(); ++j) x[j] = sd[j] * rng.gaussian();
        return x;
    };
}

Matrix second_moment(const Matrix& data) {
    require(data.rows() > 0, "second_moment: empty data set");
    const std::size_t n = data.cols();
    Matrix c(n, n);
    for (std::size_t mu = 0; mu < data.rows(); ++mu)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) c(i, j) += data(mu, i) * data(mu, j);
    for (double& x : c.data()) x /= static_cast<double>(data.rows());
    return c;
}

Vector hebb_unsupervised_step(std::span<const double> w, std::span<const double> xi, double eta) {
    require(w.size() == xi.size(), "hebb_unsupervised_step: size mismatch");
    const double y = dot(w, xi);
    Vector out(w.begin(), w.end());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += eta * y * xi[j];
    return out;
}

Vector oja_increment(std::span<const double> w, std::span<const double> xi, double eta) {
    require(w.size() == xi.size(), "oja_increment: size mismatch");
    const double y = dot(w, xi);
    Vector d(w.size());
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = eta * y * (xi[j] - y * w[j]);
    return d;
}

Vector oja_train(const Sampler& sampler, std::size_t dimension, const OjaOptions& options, RandomStream& rng) {
    Vector w = random_unit_vector(dimension, rng);
    return oja_train(sampler, std::move(w), options, rng);
}

Vector oja_train(const Sampler& sampler, Vector w, const OjaOptions& options, RandomStream& rng) {
    require(options.eta > 0.0, "oja_train: eta must be positive");
    for (std::size_t t = 0; t < options.steps; ++t) {
        const Vector xi = sampler(rng);
        const Vector d = oja_increment(w, xi, options.eta);
        for (std::size_t j = 0; j < w.size(); ++j) w[j] += d[j];
        const double len = norm(w);
        if (!(len <= options.divergence_norm))
            throw DivergenceError("oja_train: |w| = " + std::to_string(len) + " after " + std::to_string(t + 1) +
                                  " steps with eta = " + std::to_string(options.eta) +
                                  "; eta times the largest input variance should be well below 1");
    }
    return w;
}

OjaDiagnostics oja_diagnostics(std::span<const double> w, const Matrix& c) {
    require(c.rows() == w.size() && c.cols() == w.size(), "oja_diagnostics: size mismatch");
    const EigenDecomposition eig = symmetric_eigen(SymmetricMatrix(c));
    OjaDiagnostics d;
    d.norm = norm(w);
    d.u1.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) d.u1[i] = eig.vectors(i, 0);
    d.alignment = std::abs(dot(w, d.u1));
    const double cosine = std::min(1.0, d.norm > 0.0 ? d.alignment / d.norm : 0.0);
    d.angle_deg = std::acos(cosine) * 180.0 / std::numbers::pi;
    const Vector cw = c * w;
    d.mean_y2 = dot(w, cw);
    d.lambda_max = eig.values[0];
    return d;
}

Vector LinearUnitBank::outputs(std::span<const double> xi) const { return weights * xi; }

Matrix sanger_increment(const LinearUnitBank& bank, std::span<const double> xi, double eta) {
    return generalized_oja(bank, xi, eta, [](std::size_t i) { return i; });
}

Matrix oja_m_increment(const LinearUnitBank& bank, std::span<const double> xi, double eta) {
    const std::size_t m = bank.units();
    return generalized_oja(bank, xi, eta, [m](std::size_t) { return m - 1; });
}

void sanger_step(LinearUnitBank& bank, std::span<const double> xi, double eta) {
    add_into(bank.weights, sanger_increment(bank, xi, eta));
}

void oja_m_step(LinearUnitBank& bank, std::span<const double> xi, double eta) {
    add_into(bank.weights, oja_m_increment(bank, xi, eta));
}

double orthonormality_defect(const LinearUnitBank& bank) {
    double worst = 0.0;
    for (std::size_t i = 0; i < bank.units(); ++i)
        for (std::size_t k = 0; k < bank.units(); ++k)
            worst = std::max(worst,
                             std::abs(dot(bank.weights.row(i), bank.weights.row(k)) - (i == k ? 1.0 : 0.0)));
    return worst;
}

LinearUnitBank random_unit_bank(std::size_t units, std::size_t dimension, RandomStream& rng) {
    LinearUnitBank bank{Matrix(units, dimension)};
    for (std::size_t i = 0; i < units; ++i) {
        const Vector w = random_unit_vector(dimension, rng);
        std::copy(w.begin(), w.end(), bank.weights.row(i).begin());
    }
    return bank;
}

LinearUnitBank bank_from_samples(std::size_t units, const Sampler& sampler, RandomStream& rng) {
    require(units > 0, "bank_from_samples: need at least one unit");
    std::vector<Vector> rows;
    for (std::size_t tries = 0; rows.size() < units; ++tries) {
        if (tries > 1000 * units) throw Error("bank_from_samples: sampler does not produce enough distinct points");
        Vector x = sampler(rng);
        if (std::find(rows.begin(), rows.end(), x) == rows.end()) rows.push_back(std::move(x));
    }
    LinearUnitBank bank{Matrix(units, rows[0].size())};
    for (std::size_t i = 0; i < units; ++i) std::copy(rows[i].begin(), rows[i].end(), bank.weights.row(i).begin());
    return bank;
}

std::size_t winner(const Matrix& weights, std::span<const double> xi) {
    require(weights.rows() > 0 && weights.cols() == xi.size(), "winner: size mismatch");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < weights.rows(); ++i) {
        const double d = squared_distance(weights.row(i), xi);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

std::size_t competitive_step(LinearUnitBank& bank, std::span<const double> xi, double eta) {
    const std::size_t i0 = winner(bank.weights, xi);
    auto w = bank.weights.row(i0);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] += eta * (xi[j] - w[j]);
    return i0;
}

CompetitiveTrace competitive_train(LinearUnitBank& bank, const Sampler& sampler, const CompetitiveOptions& options,
                                   RandomStream& rng) {
    require(options.eta > 0.0 && options.monitor_window > 0, "competitive_train: bad options");
    CompetitiveTrace trace;
    double window = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < options.steps; ++t) {
        const Vector xi = sampler(rng);
        const std::size_t i0 = winner(bank.weights, xi);
        window += 0.5 * squared_distance(xi, bank.weights.row(i0));
        competitive_step(bank, xi, options.eta);
        if (++count == options.monitor_window) {
            trace.energy.push_back(window / static_cast<double>(count));
            window = 0.0;
            count = 0;
        }
    }
    if (count > 0) trace.energy.push_back(window / static_cast<double>(count));
    return trace;
}

std::vector<std::size_t> assign_clusters(const LinearUnitBank& bank, const Matrix& data) {
    std::vector<std::size_t> out(data.rows());
    for (std::size_t mu = 0; mu < data.rows(); ++mu) out[mu] = winner(bank.weights, data.row(mu));
    return out;
}

// ---------------------------------------------------------------------------
// Kohonen

SelfOrganizingMap SelfOrganizingMap::line(std::size_t n, std::size_t dimension) {
    SelfOrganizingMap map{Matrix(n, 1), Matrix(n, dimension)};
    for (std::size_t i = 0; i < n; ++i) map.coordinates(i, 0) = static_cast<double>(i);
    return map;
}

SelfOrganizingMap SelfOrganizingMap::grid(std::size_t rows, std::size_t cols, std::size_t dimension) {
    SelfOrganizingMap map{Matrix(rows * cols, 2), Matrix(rows * cols, dimension)};
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            map.coordinates(r * cols + c, 0) = static_cast<double>(r);
            map.coordinates(r * cols + c, 1) = static_cast<double>(c);
        }
    return map;
}

double SelfOrganizingMap::diameter() const {
    double d = 0.0;
    for (std::size_t k = 0; k < coordinates.cols(); ++k) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = 0; i < units(); ++i) {
            lo = std::min(lo, coordinates(i, k));
            hi = std::max(hi, coordinates(i, k));
        }
        if (units() > 0) d += (hi - lo) * (hi - lo);
    }
    return std::sqrt(d);
}

void SelfOrganizingMap::validate() const {
    require(coordinates.rows() == weights.rows(), "map: one grid position per weight vector");
    require(units() > 0, "map: no units");
    for (std::size_t i = 0; i < units(); ++i)
        for (std::size_t k = i + 1; k < units(); ++k)
            require(squared_distance(coordinates.row(i), coordinates.row(k)) > 0.0, "map: repeated grid position");
}

double neighbourhood(const SelfOrganizingMap& map, std::size_t i, std::size_t i0, double sigma) {
    if (sigma == 0.0) return i == i0 ? 1.0 : 0.0;
    const double r2 = squared_distance(map.coordinates.row(i), map.coordinates.row(i0));
    return std::exp(-r2 / (2.0 * sigma * sigma));
}

std::size_t kohonen_step(SelfOrganizingMap& map, std::span<const double> xi, double eta, double sigma) {
    require(sigma >= 0.0, "kohonen_step: negative width");
    const std::size_t i0 = winner(map.weights, xi);
    for (std::size_t i = 0; i < map.units(); ++i) {
        const double f = eta * neighbourhood(map, i, i0, sigma);
        if (f == 0.0) continue;
        auto w = map.weights.row(i);
        for (std::size_t j = 0; j < w.size(); ++j) w[j] += f * (xi[j] - w[j]);
    }
    return i0;
}

double PhaseSchedule::eta(std::size_t t) const {
    if (steps <= 1) return eta_start;
    const double f = static_cast<double>(t) / static_cast<double>(steps - 1);
    return eta_start + (eta_end - eta_start) * f;
}

double PhaseSchedule::sigma(std::size_t t) const {
    if (steps <= 1) return sigma_start;
    const double f = static_cast<double>(t) / static_cast<double>(steps - 1);
    return sigma_start * std::pow(sigma_end / sigma_start, f);
}

void PhaseSchedule::validate() const {
    require(eta_start > 0.0 && eta_end > 0.0 && eta_end <= eta_start, "schedule: eta must be positive, non-increasing");
    require(sigma_start > 0.0 && sigma_end > 0.0 && sigma_end <= sigma_start,
            "schedule: sigma must be positive, non-increasing");
}

KohonenSchedule KohonenSchedule::standard(const SelfOrganizingMap& map) {
    const double half = std::max(0.5, map.diameter() / 2.0);
    return {PhaseSchedule{10000, 0.1, 0.1, half, half}, PhaseSchedule{100000, 0.1, 0.01, half, 0.5}};
}

KohonenTrace kohonen_train(SelfOrganizingMap& map, const Sampler& sampler, const KohonenSchedule& schedule,
                           RandomStream& rng, std::size_t monitor_window) {
    map.validate();
    require(monitor_window > 0, "kohonen_train: monitor window must be positive");
    schedule.ordering.validate();
    schedule.convergence.validate();
    KohonenTrace trace;
    const std::pair<Phase, const PhaseSchedule*> phases[] = {{Phase::ordering, &schedule.ordering},
                                                             {Phase::convergence, &schedule.convergence}};
    for (const auto& [phase, ps] : phases) {
        double window = 0.0;
        std::size_t count = 0;
        for (std::size_t t = 0; t < ps->steps; ++t) {
            const Vector xi = sampler(rng);
            const double sigma = ps->sigma(t);
            const std::size_t i0 = winner(map.weights, xi);
            for (std::size_t i = 0; i < map.units(); ++i) {
                const double lambda = neighbourhood(map, i, i0, sigma);
                if (lambda > 0.0) window += 0.5 * lambda * squared_distance(xi, map.weights.row(i));
            }
            kohonen_step(map, xi, ps->eta(t), sigma);
            if (++count == monitor_window || t + 1 == ps->steps) {
                trace.records.push_back({phase, t + 1, window / static_cast<double>(count)});
                window = 0.0;
                count = 0;
            }
        }
    }
    return trace;
}

void initialize_from_samples(SelfOrganizingMap& map, const Sampler& sampler, RandomStream& rng) {
    const LinearUnitBank bank = bank_from_samples(map.units(), sampler, rng);
    require(bank.dimension() == map.dimension(), "initialize_from_samples: sampler dimension mismatch");
    map.weights = bank.weights;
}

namespace {

double orient(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

bool segments_cross(std::span<const double> p1, std::span<const double> p2, std::span<const double> q1,
                    std::span<const double> q2) {
    const double d1 = orient(q1, q2, p1), d2 = orient(q1, q2, p2);
    const double d3 = orient(p1, p2, q1), d4 = orient(p1, p2, q2);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

}  // namespace

std::size_t count_crossings(const SelfOrganizingMap& map) {
    require(map.grid_dimension() == 2 && map.dimension() >= 2, "count_crossings: needs a 2-D grid in >= 2-D input");
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < map.units(); ++i)
        for (std::size_t k = i + 1; k < map.units(); ++k)
            if (squared_distance(map.coordinates.row(i), map.coordinates.row(k)) == 1.0) edges.emplace_back(i, k);
    std::size_t crossings = 0;
    for (std::size_t a = 0; a < edges.size(); ++a)
        for (std::size_t b = a + 1; b < edges.size(); ++b) {
            const auto [i, j] = edges[a];
            const auto [k, l] = edges[b];
            if (i == k || i == l || j == k || j == l) continue;
            crossings += segments_cross(map.weights.row(i), map.weights.row(j), map.weights.row(k), map.weights.row(l));
        }
    return crossings;
}

Sampler parallelogram_sampler() {
    return [](RandomStream& rng) {
        const double a = rng.uniform(), b = rng.uniform();
        return Vector{a + 0.5 * b, b};
    };
}

DensityFit kohonen_density_exponent(const SelfOrganizingMap& map, const std::function<double(double)>& density,
                                    double edge_fraction) {
    require(map.dimension() == 1 && map.grid_dimension() == 1, "kohonen_density_exponent: needs a 1-D map");
    require(edge_fraction >= 0.0 && edge_fraction < 0.5, "kohonen_density_exponent: edge fraction in [0, 0.5)");
    const std::size_t n = map.units();
    require(n >= 3, "kohonen_density_exponent: need at least three units");
    // Order along the grid, not along the storage index.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return map.coordinates(a, 0) < map.coordinates(b, 0); });
    Vector w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = map.weights(order[i], 0);
    const bool up = w[1] > w[0];
    for (std::size_t i = 1; i < n; ++i)
        if ((w[i] > w[i - 1]) != up || w[i] == w[i - 1]) throw Error("kohonen_density_exponent: map is not ordered");

    const auto skip = static_cast<std::size_t>(edge_fraction * static_cast<double>(n));
    const std::size_t lo = std::max<std::size_t>(1, skip), hi = std::min(n - 1, n - skip);
    require(hi > lo + 1, "kohonen_density_exponent: edge fraction leaves too few units");
    DensityFit fit;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = lo; i < hi; ++i) {
        const double rho = 2.0 / std::abs(w[i + 1] - w[i - 1]);
        const double p = density(w[i]);
        if (!(p > 0.0)) throw Error("kohonen_density_exponent: density vanishes at a weight");
        fit.points.push_back({w[i], rho, p});
        const double x = std::log(p), y = std::log(rho);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double m = static_cast<double>(fit.points.size());
    const double var = sxx / m - (sx / m) * (sx / m);
    if (var <= 1e-12 * std::max(1.0, sxx / m)) {
        fit.flat = true;
        fit.exponent = std::numeric_limits<double>::quiet_NaN();
        return fit;
    }
    fit.exponent = (sxy / m - (sx / m) * (sy / m)) / var;
    return fit;
}

void write_map_csv(std::ostream& out, const SelfOrganizingMap& map) {
    for (std::size_t k = 0; k < map.grid_dimension(); ++k) out << (k ? ",r" : "r") << k + 1;
    for (std::size_t j = 0; j < map.dimension(); ++j) out << ",w" << j + 1;
    out << '\n';
    out.precision(17);
    for (std::size_t i = 0; i < map.units(); ++i) {
        for (std::size_t k = 0; k < map.grid_dimension(); ++k) out << (k ? "," : "") << map.coordinates(i, k);
        for (double w : map.weights.row(i)) out << ',' << w;
        out << '\n';
    }
}

}  // namespace neuro::unsupervised
