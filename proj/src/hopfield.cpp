#include "neuro/hopfield.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace neuro::hopfield {

PatternSet::PatternSet(std::size_t p, std::size_t n, std::vector<int> bits) : p_(p), n_(n), bits_(std::move(bits)) {
    if (p_ == 0 || n_ == 0) throw Error("PatternSet: need at least one pattern of at least one bit");
    if (bits_.size() != p_ * n_) throw Error("PatternSet: bit count does not match p * N");
    for (int b : bits_)
        if (b != 1 && b != -1) throw Error("PatternSet: entries must be +1 or -1");
}

PatternSet PatternSet::from_rows(const std::vector<std::vector<int>>& rows) {
    if (rows.empty()) throw Error("PatternSet: no patterns");
    std::vector<int> bits;
    for (const auto& r : rows) {
        if (r.size() != rows.front().size()) throw Error("PatternSet: patterns of unequal length");
        bits.insert(bits.end(), r.begin(), r.end());
    }
    return PatternSet(rows.size(), rows.front().size(), std::move(bits));
}

PatternSet PatternSet::random(std::size_t p, std::size_t n, RandomStream& rng) {
    std::vector<int> bits(p * n);
    for (auto& b : bits) b = rng.spin();
    return PatternSet(p, n, std::move(bits));
}

PatternSet read_patterns(std::istream& in) {
    std::size_t p = 0, n = 0;
    if (!(in >> p >> n)) throw Error("pattern file: missing 'p N' header");
    std::vector<int> bits(p * n);
    for (auto& b : bits)
        if (!(in >> b)) throw Error("pattern file: truncated pattern data");
    return PatternSet(p, n, std::move(bits));
}

void write_patterns(std::ostream& out, const PatternSet& patterns) {
    out << patterns.p() << ' ' << patterns.n() << '\n';
    for (std::size_t mu = 0; mu < patterns.p(); ++mu) {
        for (std::size_t i = 0; i < patterns.n(); ++i) out << (i ? " " : "") << patterns(mu, i);
        out << '\n';
    }
}

PatternSet load_patterns(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open pattern file " + path);
    return read_patterns(in);
}

void save_patterns(const std::string& path, const PatternSet& patterns) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write pattern file " + path);
    write_patterns(out, patterns);
}

// ---------------------------------------------------------------------------

HopfieldNet::HopfieldNet(Matrix weights, Vector thresholds, DiagonalMode diagonal)
    : weights_(std::move(weights)), thresholds_(std::move(thresholds)), diagonal_(diagonal) {
    const std::size_t n = weights_.rows();
    if (weights_.cols() != n) throw Error("HopfieldNet: weight matrix not square");
    if (thresholds_.size() != n) throw Error("HopfieldNet: threshold count mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j)
            if (weights_(i, j) != weights_(j, i)) throw Error("HopfieldNet: weights not symmetric");
        if (diagonal_ == DiagonalMode::zeroed && weights_(i, i) != 0.0)
            throw Error("HopfieldNet: diagonal must be zero in zeroed mode");
    }
}

double HopfieldNet::local_field(std::span<const int> state, std::size_t i) const {
    const auto row = weights_.row(i);
    double b = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) b += row[j] * state[j];
    return b - thresholds_[i];
}

HopfieldNet hebb_weights(const PatternSet& patterns, DiagonalMode diagonal) {
    const std::size_t n = patterns.n();
    Matrix w(n, n);
    for (std::size_t mu = 0; mu < patterns.p(); ++mu) {
        const auto xi = patterns.pattern(mu);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) w(i, j) += xi[i] * xi[j];
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double v = (i == j && diagonal == DiagonalMode::zeroed) ? 0.0 : w(i, j) / double(n);
            w(i, j) = v;
            w(j, i) = v;
        }
    return HopfieldNet(std::move(w), Vector(n, 0.0), diagonal);
}

HopfieldNet hebb_pseudoinverse(const PatternSet& patterns) {
    const std::size_t n = patterns.n();
    const std::size_t p = patterns.p();
    Matrix q(p, p);
    for (std::size_t mu = 0; mu < p; ++mu)
        for (std::size_t nu = 0; nu < p; ++nu) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += patterns(mu, i) * patterns(nu, i);
            q(mu, nu) = s / double(n);
        }
    const Matrix qinv = inverse(q);
    Matrix w(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (std::size_t mu = 0; mu < p; ++mu)
                for (std::size_t nu = 0; nu < p; ++nu) s += patterns(mu, i) * qinv(mu, nu) * patterns(nu, j);
            w(i, j) = s / double(n);
        }
    // symmetrise exactly; Q^-1 is symmetric only up to rounding
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) w(i, j) = w(j, i);
    return HopfieldNet(std::move(w), Vector(n, 0.0), DiagonalMode::kept);
}

Matrix diluted_hebb_weights(const PatternSet& patterns, std::size_t connections, RandomStream& rng) {
    const std::size_t n = patterns.n();
    if (connections == 0 || connections >= n) throw Error("diluted_hebb_weights: need 0 < K < N");
    Matrix w(n, n);
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < n; ++i) {
        others.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) others.push_back(j);
        // partial Fisher-Yates: the first K entries are a uniform K-subset
        for (std::size_t k = 0; k < connections; ++k) {
            const std::size_t r = k + rng.uniform_index(others.size() - k);
            std::swap(others[k], others[r]);
            const std::size_t j = others[k];
            double s = 0.0;
            for (std::size_t mu = 0; mu < patterns.p(); ++mu) s += patterns(mu, i) * patterns(mu, j);
            w(i, j) = s / double(connections);
        }
    }
    return w;
}

std::size_t hamming_distance(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw Error("hamming_distance: length mismatch");
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

double overlap(std::span<const int> state, std::span<const int> pattern) {
    if (state.size() != pattern.size()) throw Error("overlap: length mismatch");
    long s = 0;
    for (std::size_t i = 0; i < state.size(); ++i) s += state[i] * pattern[i];
    return static_cast<double>(s) / static_cast<double>(state.size());
}

// ---------------------------------------------------------------------------

SpinState update_deterministic(const HopfieldNet& net, SpinState state, UpdateMode mode, RandomStream& rng,
                               std::size_t step) {
    const std::size_t n = net.size();
    if (state.size() != n) throw Error("update_deterministic: state length mismatch");
    switch (mode) {
        case UpdateMode::synchronous: {
            SpinState next(n);
            for (std::size_t i = 0; i < n; ++i) next[i] = sgn(net.local_field(state, i));
            return next;
        }
        case UpdateMode::async_random: {
            const std::size_t i = rng.uniform_index(n);
            state[i] = sgn(net.local_field(state, i));
            return state;
        }
        case UpdateMode::async_typewriter: {
            const std::size_t i = step % n;
            state[i] = sgn(net.local_field(state, i));
            return state;
        }
    }
    return state;
}

bool is_fixed_point(const HopfieldNet& net, std::span<const int> state) {
    for (std::size_t i = 0; i < net.size(); ++i)
        if (sgn(net.local_field(state, i)) != state[i]) return false;
    return true;
}

std::optional<SpinState> relax_deterministic(const HopfieldNet& net, SpinState state, UpdateMode mode,
                                             RandomStream& rng, std::size_t max_sweeps) {
    const std::size_t n = net.size();
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        if (is_fixed_point(net, state)) return state;
        if (mode == UpdateMode::synchronous) {
            state = update_deterministic(net, std::move(state), mode, rng);
        } else {
            for (std::size_t k = 0; k < n; ++k) state = update_deterministic(net, std::move(state), mode, rng, k);
        }
    }
    if (is_fixed_point(net, state)) return state;
    return std::nullopt;
}

double stochastic_probability(double beta, double b) {
    if (std::isinf(beta)) return b >= 0.0 ? 1.0 : 0.0;
    return 1.0 / (1.0 + std::exp(-2.0 * beta * b));
}

StochasticRun update_stochastic(const HopfieldNet& net, SpinState state, double beta, RandomStream& rng,
                                std::span<const int> reference, const StochasticOptions& options) {
    const std::size_t n = net.size();
    if (!(beta >= 0.0)) throw Error("update_stochastic: beta must be non-negative");
    if (state.size() != n || reference.size() != n) throw Error("update_stochastic: length mismatch");

    // Local fields without thresholds, kept current as spins flip.
    Vector field(n);
    for (std::size_t i = 0; i < n; ++i) field[i] = net.local_field(state, i) + net.thresholds()[i];
    long overlap_sum = 0;
    for (std::size_t i = 0; i < n; ++i) overlap_sum += state[i] * reference[i];

    StochasticRun run;
    auto& trace = run.trace;
    trace.transient = std::min(options.transient.value_or(std::max<std::size_t>(100, n)), options.sweeps / 2);
    trace.instantaneous.reserve(options.sweeps);
    trace.running_mean.reserve(options.sweeps);
    double cumulative = 0.0;

    const Matrix& w = net.weights();
    for (std::size_t sweep = 0; sweep < options.sweeps; ++sweep) {
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = rng.uniform_index(n);
            const double b = field[i] - net.thresholds()[i];
            const int s = rng.uniform() < stochastic_probability(beta, b) ? 1 : -1;
            if (s != state[i]) {
                const int delta = s - state[i];
                for (std::size_t j = 0; j < n; ++j) field[j] += w(j, i) * delta;
                overlap_sum += delta * reference[i];
                state[i] = s;
            }
        }
        const double m = static_cast<double>(overlap_sum) / double(n);
        cumulative += m;
        trace.instantaneous.push_back(m);
        trace.running_mean.push_back(cumulative / double(sweep + 1));
    }

    const std::size_t count = options.sweeps - trace.transient;
    if (count > 0) {
        double sum = 0.0;
        for (std::size_t t = trace.transient; t < options.sweeps; ++t) sum += trace.instantaneous[t];
        trace.steady_mean = sum / double(count);
        constexpr std::size_t kBatches = 20;
        if (count >= 2 * kBatches) {
            const std::size_t len = count / kBatches;
            double ss = 0.0;
            for (std::size_t b = 0; b < kBatches; ++b) {
                double bs = 0.0;
                for (std::size_t t = 0; t < len; ++t) bs += trace.instantaneous[trace.transient + b * len + t];
                const double d = bs / double(len) - trace.steady_mean;
                ss += d * d;
            }
            trace.steady_stderr = std::sqrt(ss / double(kBatches - 1) / double(kBatches));
        }
    }
    run.state = std::move(state);
    return run;
}

double energy(const HopfieldNet& net, std::span<const int> state) {
    const std::size_t n = net.size();
    if (state.size() != n) throw Error("energy: state length mismatch");
    double h = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += net.weights()(i, j) * state[j];
        h += -0.5 * row * state[i] + net.thresholds()[i] * state[i];
    }
    return h;
}

// ---------------------------------------------------------------------------

double cross_talk(const PatternSet& patterns, std::size_t i, std::size_t nu) {
    if (i >= patterns.n() || nu >= patterns.p()) throw Error("cross_talk: index out of range");
    double s = 0.0;
    for (std::size_t mu = 0; mu < patterns.p(); ++mu) {
        if (mu == nu) continue;
        double inner = 0.0;
        for (std::size_t j = 0; j < patterns.n(); ++j)
            if (j != i) inner += patterns(mu, j) * patterns(nu, j);
        s += patterns(mu, i) * inner;
    }
    return -patterns(nu, i) * s / double(patterns.n());
}

double sample_cross_talk(std::size_t n, std::size_t p, RandomStream& rng) {
    if (n == 0 || p == 0) throw Error("sample_cross_talk: empty pattern set");
    const std::size_t words = (n + 63) / 64;
    const std::uint64_t tail_mask = (n % 64 == 0) ? ~0ULL : ((1ULL << (n % 64)) - 1);
    auto bit = [](const std::vector<std::uint64_t>& row, std::size_t j) -> int {
        return ((row[j / 64] >> (j % 64)) & 1ULL) ? 1 : -1;
    };
    auto draw = [&](std::vector<std::uint64_t>& row) {
        for (auto& word : row) word = rng.next_u64();
        row.back() &= tail_mask;
    };

    // bit = 1 encodes +1, bit = 0 encodes -1 (masked tail bits agree in every row)
    std::vector<std::uint64_t> target(words), other(words);
    draw(target);
    const std::size_t i = rng.uniform_index(n);
    const int target_i = bit(target, i);

    long total = 0;
    for (std::size_t mu = 1; mu < p; ++mu) {
        draw(other);
        std::size_t mismatches = 0;
        for (std::size_t w = 0; w < words; ++w) mismatches += std::popcount(target[w] ^ other[w]);
        const int other_i = bit(other, i);
        // sum_{j != i} xi_j^mu xi_j^nu
        const long inner = static_cast<long>(n) - 2 * static_cast<long>(mismatches) - other_i * target_i;
        total += other_i * inner;
    }
    return -target_i * static_cast<double>(total) / double(n);
}

Estimate one_step_error_mc(std::size_t n, std::size_t p, std::size_t trials, RandomStream& rng) {
    if (trials == 0) throw Error("one_step_error_mc: need at least one trial");
    std::size_t errors = 0;
    for (std::size_t t = 0; t < trials; ++t)
        if (sample_cross_talk(n, p, rng) > 1.0) ++errors;
    return binomial_estimate(errors, trials);
}

double p_error_formula(double alpha) {
    if (!(alpha > 0.0)) throw Error("p_error_formula: alpha must be positive");
    return 0.5 * neuro::erfc(1.0 / std::sqrt(2.0 * alpha));
}

std::vector<int> mixed_state(const PatternSet& patterns, std::span<const std::size_t> indices,
                             std::span<const int> signs) {
    if (indices.size() % 2 == 0) throw Error("mixed_state: need an odd number of patterns");
    if (!signs.empty() && signs.size() != indices.size()) throw Error("mixed_state: sign count mismatch");
    for (auto mu : indices)
        if (mu >= patterns.p()) throw Error("mixed_state: pattern index out of range");
    std::vector<int> out(patterns.n());
    for (std::size_t i = 0; i < patterns.n(); ++i) {
        int s = 0;
        for (std::size_t k = 0; k < indices.size(); ++k) s += (signs.empty() ? 1 : signs[k]) * patterns(indices[k], i);
        out[i] = sgn(s);
    }
    return out;
}

}  // namespace neuro::hopfield
