#include "neuro/anneal.hpp"

#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace neuro::anneal {

double acceptance_probability(Kernel kernel, double beta, double delta) {
    if (kernel == Kernel::metropolis) {
        if (delta <= 0.0 || beta == 0.0) return 1.0;
        return std::isinf(beta) ? 0.0 : std::exp(-beta * delta);
    }
    if (std::isinf(beta)) return delta < 0.0 ? 1.0 : (delta == 0.0 ? 0.5 : 0.0);
    const double x = beta * delta;
    // 1/(1+e^x) written to avoid overflow for large |x|
    return x > 0.0 ? std::exp(-x) / (1.0 + std::exp(-x)) : 1.0 / (1.0 + std::exp(x));
}

// ---------------------------------------------------------------------------

Proposal<SpinFlipModel::Config> SpinFlipModel::propose(const Config& s, RandomStream& rng) const {
    Config c = s;
    const std::size_t i = rng.uniform_index(c.size());
    c[i] = -c[i];
    // H changes only through the terms involving spin i
    const double b = net_.local_field(s, i) + net_.thresholds()[i] - net_.weights()(i, i) * s[i];
    const double delta = 2.0 * s[i] * b - 2.0 * net_.thresholds()[i] * s[i];
    return {std::move(c), delta};
}

bool SpinFlipModel::is_valid(const Config& s) const {
    if (s.size() != net_.size()) return false;
    return std::all_of(s.begin(), s.end(), [](int v) { return v == 1 || v == -1; });
}

std::vector<SpinFlipModel::Config> SpinFlipModel::states() const {
    const std::size_t n = net_.size();
    if (n > 20) throw Error("SpinFlipModel::states: too many spins to enumerate");
    std::vector<Config> out;
    for (std::size_t code = 0; code < (std::size_t{1} << n); ++code) {
        Config s(n);
        for (std::size_t i = 0; i < n; ++i) s[i] = ((code >> i) & 1U) ? 1 : -1;
        out.push_back(std::move(s));
    }
    return out;
}

double SpinFlipModel::proposal_probability(const Config& a, const Config& b) const {
    return hopfield::hamming_distance(a, b) == 1 ? 1.0 / double(net_.size()) : 0.0;
}

// ---------------------------------------------------------------------------

BinaryMatrix::BinaryMatrix(std::size_t k, std::vector<std::uint8_t> bits) : k_(k), bits_(std::move(bits)) {
    if (bits_.size() != k_ * k_) throw Error("BinaryMatrix: expected k*k entries");
    for (auto b : bits_)
        if (b > 1) throw Error("BinaryMatrix: entries must be 0 or 1");
}

BinaryMatrix BinaryMatrix::from_order(const std::vector<std::size_t>& order) {
    BinaryMatrix m(order.size());
    for (std::size_t j = 0; j < order.size(); ++j) {
        if (order[j] >= order.size()) throw Error("BinaryMatrix::from_order: city index out of range");
        m.set(order[j], j, 1);
    }
    if (!m.is_permutation()) throw Error("BinaryMatrix::from_order: not a permutation");
    return m;
}

void BinaryMatrix::set(std::size_t i, std::size_t j, int v) {
    if (v != 0 && v != 1) throw Error("BinaryMatrix::set: entries must be 0 or 1");
    bits_[i * k_ + j] = static_cast<std::uint8_t>(v);
}

void BinaryMatrix::swap_rows(std::size_t a, std::size_t b) {
    std::swap_ranges(bits_.begin() + a * k_, bits_.begin() + (a + 1) * k_, bits_.begin() + b * k_);
}

bool BinaryMatrix::is_permutation() const {
    for (std::size_t i = 0; i < k_; ++i) {
        int row = 0, col = 0;
        for (std::size_t j = 0; j < k_; ++j) {
            row += (*this)(i, j);
            col += (*this)(j, i);
        }
        if (row != 1 || col != 1) return false;
    }
    return true;
}

std::vector<std::size_t> BinaryMatrix::order() const {
    if (!is_permutation()) throw Error("BinaryMatrix::order: not a valid tour");
    std::vector<std::size_t> out(k_);
    for (std::size_t m = 0; m < k_; ++m)
        for (std::size_t j = 0; j < k_; ++j)
            if ((*this)(m, j)) out[j] = m;
    return out;
}

TspInstance::TspInstance(std::vector<City> cities) : cities_(std::move(cities)), d_(cities_.size(), cities_.size()) {
    if (cities_.size() < 3) throw Error("TspInstance: need at least three cities");
    for (std::size_t m = 0; m < cities_.size(); ++m)
        for (std::size_t n = 0; n < cities_.size(); ++n)
            d_(m, n) = std::hypot(cities_[m].x - cities_[n].x, cities_[m].y - cities_[n].y);
}

double TspInstance::max_distance() const {
    double d = 0.0;
    for (double v : d_.data()) d = std::max(d, v);
    return d;
}

TspInstance read_tsp(std::istream& in) {
    std::size_t k = 0;
    if (!(in >> k)) throw Error("TSP file: missing city count");
    std::vector<City> cities(k);
    for (auto& c : cities)
        if (!(in >> c.x >> c.y)) throw Error("TSP file: truncated coordinates");
    return TspInstance(std::move(cities));
}

void write_tsp(std::ostream& out, const TspInstance& instance) {
    out << instance.size() << '\n';
    auto old = out.precision(17);
    for (const auto& c : instance.cities()) out << c.x << ' ' << c.y << '\n';
    out.precision(old);
}

TspInstance load_tsp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open TSP file " + path);
    return read_tsp(in);
}

TspInstance seven_city_instance() {
    return TspInstance({{0.1, 0.15}, {0.4, 0.2}, {0.5, 0.7}, {0.2, 0.1}, {0.1, 0.8}, {0.8, 0.9}, {0.9, 0.3}});
}

double tsp_path_length(const TourMatrix& tour, const TspInstance& instance) {
    const std::size_t k = tour.size();
    if (k != instance.size()) throw Error("tsp_path_length: size mismatch");
    double l = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t prev = (j + k - 1) % k, next = (j + 1) % k;
        for (std::size_t m = 0; m < k; ++m) {
            if (!tour(m, j)) continue;
            for (std::size_t n = 0; n < k; ++n)
                l += instance.distance(m, n) * (tour(n, prev) + tour(n, next));
        }
    }
    return 0.5 * l;
}

double tour_length(const std::vector<std::size_t>& order, const TspInstance& instance) {
    double l = 0.0;
    for (std::size_t j = 0; j < order.size(); ++j) l += instance.distance(order[j], order[(j + 1) % order.size()]);
    return l;
}

double tsp_energy(const TourMatrix& tour, const TspInstance& instance, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw Error("tsp_energy: multipliers must be positive");
    const std::size_t k = tour.size();
    double rows = 0.0, cols = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        int r = 0, c = 0;
        for (std::size_t j = 0; j < k; ++j) {
            r += tour(i, j);
            c += tour(j, i);
        }
        rows += double((1 - r) * (1 - r));
        cols += double((1 - c) * (1 - c));
    }
    return tsp_path_length(tour, instance) + 0.5 * a * rows + 0.5 * b * cols;
}

TspModel::TspModel(TspInstance instance, std::optional<double> a, std::optional<double> b)
    : instance_(std::move(instance)),
      a_(a.value_or(2.0 * instance_.max_distance())),
      b_(b.value_or(2.0 * instance_.max_distance())) {
    if (!(a_ > 0.0) || !(b_ > 0.0)) throw Error("TspModel: multipliers must be positive");
}

Proposal<TspModel::Config> TspModel::propose(const Config& m, RandomStream& rng) const {
    const std::size_t k = m.size();
    const std::size_t r1 = rng.uniform_index(k);
    std::size_t r2 = rng.uniform_index(k - 1);
    if (r2 >= r1) ++r2;
    Config c = m;
    c.swap_rows(r1, r2);
    const double delta = energy(c) - energy(m);
    return {std::move(c), delta};
}

std::vector<TspModel::Config> TspModel::states() const {
    const std::size_t k = instance_.size();
    if (k > 8) throw Error("TspModel::states: too many cities to enumerate");
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::vector<Config> out;
    do out.push_back(BinaryMatrix::from_order(order));
    while (std::next_permutation(order.begin(), order.end()));
    return out;
}

double TspModel::proposal_probability(const Config& from, const Config& to) const {
    const std::size_t k = from.size();
    std::vector<std::size_t> diff;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            if (from(i, j) != to(i, j)) {
                diff.push_back(i);
                break;
            }
    if (diff.size() != 2) return 0.0;
    Config swapped = from;
    swapped.swap_rows(diff[0], diff[1]);
    return swapped == to ? 2.0 / double(k * (k - 1)) : 0.0;
}

TspModel::Config TspModel::random_tour(RandomStream& rng) const {
    std::vector<std::size_t> order(instance_.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    return BinaryMatrix::from_order(order);
}

std::vector<std::size_t> canonical_tour(std::vector<std::size_t> order) {
    if (order.size() < 3) return order;
    const auto zero = std::min_element(order.begin(), order.end());
    std::rotate(order.begin(), zero, order.end());
    if (order[1] > order.back()) std::reverse(order.begin() + 1, order.end());
    return order;
}

BruteForceTour tsp_brute_force(const TspInstance& instance) {
    const std::size_t k = instance.size();
    if (k > 12) throw Error("tsp_brute_force: too many cities");
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    BruteForceTour best{order, std::numeric_limits<double>::infinity(), 0};
    // city 0 fixed first; each direction counted once
    do {
        if (order[1] > order.back()) continue;
        ++best.distinct_tours;
        const double l = tour_length(order, instance);
        if (l < best.length) {
            best.length = l;
            best.order = order;
        }
    } while (std::next_permutation(order.begin() + 1, order.end()));
    return best;
}

// ---------------------------------------------------------------------------

bool kqueens_valid(const BinaryMatrix& board) {
    const std::size_t k = board.size();
    std::vector<std::pair<long, long>> queens;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            if (board(i, j)) queens.emplace_back(long(i), long(j));
    if (queens.size() != k) return false;
    for (std::size_t a = 0; a < queens.size(); ++a)
        for (std::size_t b = a + 1; b < queens.size(); ++b) {
            const auto [i, j] = queens[a];
            const auto [p, q] = queens[b];
            if (i == p || j == q || i - j == p - q || i + j == p + q) return false;
        }
    return true;
}

QueensModel::QueensModel(std::size_t k) : k_(k) {
    if (k_ < 1) throw Error("QueensModel: need k >= 1");
}

double QueensModel::energy(const Config& perm) const {
    std::size_t clashes = 0;
    for (std::size_t i = 0; i < perm.size(); ++i)
        for (std::size_t j = i + 1; j < perm.size(); ++j) {
            const std::size_t dc = perm[i] > perm[j] ? perm[i] - perm[j] : perm[j] - perm[i];
            clashes += dc == j - i;
        }
    return double(clashes);
}

Proposal<QueensModel::Config> QueensModel::propose(const Config& perm, RandomStream& rng) const {
    if (k_ < 2) return {perm, 0.0};
    const std::size_t r1 = rng.uniform_index(k_);
    std::size_t r2 = rng.uniform_index(k_ - 1);
    if (r2 >= r1) ++r2;
    Config c = perm;
    std::swap(c[r1], c[r2]);
    const double delta = energy(c) - energy(perm);
    return {std::move(c), delta};
}

bool QueensModel::is_valid(const Config& perm) const {
    if (perm.size() != k_) return false;
    return kqueens_valid(board(perm));
}

QueensModel::Config QueensModel::random_configuration(RandomStream& rng) const {
    Config c(k_);
    std::iota(c.begin(), c.end(), 0);
    rng.shuffle(c);
    return c;
}

BinaryMatrix QueensModel::board(const Config& perm) {
    BinaryMatrix m(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        if (perm[i] >= perm.size()) throw Error("QueensModel::board: column out of range");
        m.set(i, perm[i], 1);
    }
    return m;
}

std::vector<std::size_t> eight_queens_solution() { return {0, 4, 7, 5, 2, 6, 1, 3}; }

// ---------------------------------------------------------------------------

namespace {

long checked_sum(const std::vector<long>& v, const char* name) {
    long s = 0;
    for (long x : v) {
        if (x <= 0) throw Error(std::string("DigestInstance: non-positive fragment in ") + name);
        s += x;
    }
    return s;
}

std::vector<long> parse_longs(const std::string& text) {
    std::vector<long> out;
    std::string cleaned = text;
    for (auto& ch : cleaned)
        if (ch == ',' || ch == '[' || ch == ']') ch = ' ';
    std::istringstream in(cleaned);
    long v;
    while (in >> v) out.push_back(v);
    if (!in.eof()) throw Error("digest file: malformed integer list");
    return out;
}

}  // namespace

DigestInstance::DigestInstance(std::vector<long> a, std::vector<long> b, std::vector<long> c, long length)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), length_(length) {
    if (a_.empty() || b_.empty() || c_.empty()) throw Error("DigestInstance: empty fragment list");
    if (checked_sum(a_, "a") != length_ || checked_sum(b_, "b") != length_ || checked_sum(c_, "c") != length_)
        throw Error("DigestInstance: fragment lengths must sum to L");
    std::sort(c_.begin(), c_.end(), std::greater<>());
}

DigestInstance read_digest(std::istream& in) {
    std::optional<std::vector<long>> a, b, c;
    std::optional<long> length;
    std::string line;
    while (std::getline(in, line)) {
        const auto colon = line.find(':');
        if (colon == std::string::npos) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            throw Error("digest file: expected 'key: values', got '" + line + "'");
        }
        std::string key = line.substr(0, colon);
        key.erase(std::remove_if(key.begin(), key.end(), [](unsigned char ch) { return std::isspace(ch); }),
                  key.end());
        const auto values = parse_longs(line.substr(colon + 1));
        if (key == "a") a = values;
        else if (key == "b") b = values;
        else if (key == "c") c = values;
        else if (key == "L") {
            if (values.size() != 1) throw Error("digest file: L takes one value");
            length = values[0];
        } else {
            throw Error("digest file: unknown key '" + key + "'");
        }
    }
    if (!a || !b || !c || !length) throw Error("digest file: need a, b, c and L");
    return DigestInstance(*a, *b, *c, *length);
}

void write_digest(std::ostream& out, const DigestInstance& instance) {
    auto list = [&](const char* key, const std::vector<long>& v) {
        out << key << ':';
        for (long x : v) out << ' ' << x;
        out << '\n';
    };
    list("a", instance.a());
    list("b", instance.b());
    list("c", instance.c());
    out << "L: " << instance.length() << '\n';
}

DigestInstance load_digest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open digest file " + path);
    return read_digest(in);
}

DigestInstance digest_instance(long length) {
    switch (length) {
        case 10000:
            return DigestInstance({5976, 1543, 1319, 1120, 42}, {4513, 2823, 2057, 607},
                                  {4513, 1543, 1319, 1120, 607, 514, 342, 42}, 10000);
        case 20000:
            return DigestInstance({8479, 4868, 3696, 2646, 169, 142}, {11968, 5026, 1081, 1050, 691, 184},
                                  {8479, 4167, 2646, 1081, 881, 859, 701, 691, 184, 169, 142}, 20000);
        case 40000:
            return DigestInstance({9979, 9348, 8022, 4020, 2693, 1892, 1714, 1371, 510, 451},
                                  {9492, 8453, 7749, 7365, 2292, 2180, 1023, 959, 278, 124, 85},
                                  {7042, 5608, 5464, 4371, 3884, 3121, 1901, 1768, 1590, 959, 899, 707, 702, 510, 451,
                                   412, 278, 124, 124, 85},
                                  40000);
        default:
            throw Error("digest_instance: known lengths are 10000, 20000 and 40000");
    }
}

std::vector<long> implied_fragments(const DigestInstance& instance, const DigestConfig& config) {
    std::vector<long> cuts = {0, instance.length()};
    long pos = 0;
    for (std::size_t i = 0; i + 1 < config.sigma.size(); ++i) cuts.push_back(pos += instance.a()[config.sigma[i]]);
    pos = 0;
    for (std::size_t i = 0; i + 1 < config.mu.size(); ++i) cuts.push_back(pos += instance.b()[config.mu[i]]);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<long> gaps;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) gaps.push_back(cuts[i + 1] - cuts[i]);
    std::sort(gaps.begin(), gaps.end(), std::greater<>());
    return gaps;
}

double digest_energy(const DigestInstance& instance, const DigestConfig& config) {
    const auto chat = implied_fragments(instance, config);
    const auto& c = instance.c();
    double h = 0.0;
    for (std::size_t j = 0; j < std::max(c.size(), chat.size()); ++j) {
        const double cj = j < c.size() ? double(c[j]) : 0.0;
        const double hj = j < chat.size() ? double(chat[j]) : 0.0;
        const double d = cj - hj;
        h += (cj > 0.0 ? d * d / cj : d * d);
    }
    return h;
}

DigestModel::DigestModel(DigestInstance instance, std::size_t max_block)
    : instance_(std::move(instance)), max_block_(max_block) {
    if (max_block_ < 2) throw Error("DigestModel: block length must be at least 2");
    for (bool on_sigma : {true, false}) {
        const std::size_t n = on_sigma ? instance_.a().size() : instance_.b().size();
        for (std::size_t len = 2; len <= std::min(max_block_, n); ++len)
            for (std::size_t start = 0; start + len <= n; ++start) moves_.push_back({on_sigma, start, len});
    }
}

DigestModel::Config DigestModel::apply(const Config& c, const Move& m) const {
    Config out = c;
    auto& v = m.on_sigma ? out.sigma : out.mu;
    std::reverse(v.begin() + long(m.start), v.begin() + long(m.start + m.length));
    return out;
}

Proposal<DigestModel::Config> DigestModel::propose(const Config& c, RandomStream& rng) const {
    if (moves_.empty()) return {c, 0.0};
    Config next = apply(c, moves_[rng.uniform_index(moves_.size())]);
    const double delta = energy(next) - energy(c);
    return {std::move(next), delta};
}

bool DigestModel::is_valid(const Config& c) const {
    auto is_perm = [](std::vector<std::size_t> v, std::size_t n) {
        if (v.size() != n) return false;
        std::sort(v.begin(), v.end());
        for (std::size_t i = 0; i < n; ++i)
            if (v[i] != i) return false;
        return true;
    };
    return is_perm(c.sigma, instance_.a().size()) && is_perm(c.mu, instance_.b().size());
}

std::vector<DigestModel::Config> DigestModel::states() const {
    const std::size_t n = instance_.a().size(), m = instance_.b().size();
    if (n + m > 14) throw Error("DigestModel::states: too many permutations to enumerate");
    Config c;
    c.sigma.resize(n);
    std::iota(c.sigma.begin(), c.sigma.end(), 0);
    std::vector<Config> out;
    do {
        c.mu.resize(m);
        std::iota(c.mu.begin(), c.mu.end(), 0);
        do out.push_back(c);
        while (std::next_permutation(c.mu.begin(), c.mu.end()));
    } while (std::next_permutation(c.sigma.begin(), c.sigma.end()));
    return out;
}

double DigestModel::proposal_probability(const Config& from, const Config& to) const {
    if (moves_.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& mv : moves_) hits += apply(from, mv) == to;
    return double(hits) / double(moves_.size());
}

DigestModel::Config DigestModel::random_configuration(RandomStream& rng) const {
    Config c;
    c.sigma.resize(instance_.a().size());
    c.mu.resize(instance_.b().size());
    std::iota(c.sigma.begin(), c.sigma.end(), 0);
    std::iota(c.mu.begin(), c.mu.end(), 0);
    rng.shuffle(c.sigma);
    rng.shuffle(c.mu);
    return c;
}

DigestOrdering canonical_ordering(const DigestInstance& instance, const DigestConfig& config) {
    DigestOrdering o;
    for (auto i : config.sigma) o.a_order.push_back(instance.a()[i]);
    for (auto i : config.mu) o.b_order.push_back(instance.b()[i]);
    DigestOrdering mirror{{o.a_order.rbegin(), o.a_order.rend()}, {o.b_order.rbegin(), o.b_order.rend()}};
    return std::min(o, mirror);
}

std::set<DigestOrdering> digest_solutions(const DigestInstance& instance) {
    std::set<DigestOrdering> out;
    DigestConfig c;
    c.sigma.resize(instance.a().size());
    std::iota(c.sigma.begin(), c.sigma.end(), 0);
    do {
        c.mu.resize(instance.b().size());
        std::iota(c.mu.begin(), c.mu.end(), 0);
        do {
            if (implied_fragments(instance, c) == instance.c()) out.insert(canonical_ordering(instance, c));
        } while (std::next_permutation(c.mu.begin(), c.mu.end()));
    } while (std::next_permutation(c.sigma.begin(), c.sigma.end()));
    return out;
}

}  // namespace neuro::anneal
