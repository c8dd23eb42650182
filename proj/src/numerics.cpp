#include "neuro/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

namespace neuro {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw Error("Matrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Vector Matrix::operator*(std::span<const double> x) const {
    if (x.size() != cols_) throw Error("Matrix * vector: shape mismatch");
    Vector y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) y[i] = dot(row(i), x);
    return y;
}

Matrix Matrix::operator*(const Matrix& other) const {
    if (cols_ != other.rows_) throw Error("Matrix * Matrix: shape mismatch");
    Matrix out(rows_, other.cols_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t k = 0; k < cols_; ++k) {
            const double a = (*this)(i, k);
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < other.cols_; ++j) out(i, j) += a * other(k, j);
        }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("max_abs_diff: length mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double frobenius_norm(const Matrix& m) { return norm(m.data()); }

namespace {

struct LuFactors {
    Matrix lu;
    std::vector<std::size_t> perm;
};

LuFactors lu_decompose(const Matrix& a, double pivot_tol) {
    if (a.rows() != a.cols()) throw Error("LU: matrix not square");
    const std::size_t n = a.rows();
    LuFactors f{a, std::vector<std::size_t>(n)};
    for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;
    double scale = 0.0;
    for (double v : a.data()) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) throw SingularMatrixError("LU: zero matrix");
    Matrix& m = f.lu;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(m(i, k)) > std::abs(m(piv, k))) piv = i;
        if (std::abs(m(piv, k)) <= pivot_tol * scale)
            throw SingularMatrixError("LU: matrix is singular to working precision");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
            std::swap(f.perm[k], f.perm[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            m(i, k) /= m(k, k);
            const double l = m(i, k);
            if (l == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) m(i, j) -= l * m(k, j);
        }
    }
    return f;
}

Vector lu_solve(const LuFactors& f, std::span<const double> b) {
    const std::size_t n = f.lu.rows();
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[f.perm[i]];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) x[i] -= f.lu(i, j) * x[j];
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = i + 1; j < n; ++j) x[i] -= f.lu(i, j) * x[j];
        x[i] /= f.lu(i, i);
    }
    return x;
}

}  // namespace

Vector solve_linear(const Matrix& a, std::span<const double> b, double pivot_tol) {
    if (b.size() != a.rows()) throw Error("solve_linear: rhs length mismatch");
    return lu_solve(lu_decompose(a, pivot_tol), b);
}

Matrix inverse(const Matrix& a, double pivot_tol) {
    const auto f = lu_decompose(a, pivot_tol);
    const std::size_t n = a.rows();
    Matrix inv(n, n);
    Vector e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[j] = 1.0;
        const Vector col = lu_solve(f, e);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    return inv;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kTwoOverSqrtPi = 2.0 * std::numbers::inv_sqrtpi;

// erf(x) = 2/sqrt(pi) exp(-x^2) sum_n 2^n x^(2n+1) / (1*3*...*(2n+1)).
// Every term is positive, so there is no cancellation for x >= 0.
double erf_series(double x) {
    const double x2 = x * x;
    double term = x;
    double sum = x;
    for (int n = 0; n < 500; ++n) {
        term *= 2.0 * x2 / (2.0 * n + 3.0);
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return kTwoOverSqrtPi * std::exp(-x2) * sum;
}

// erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
// evaluated with the modified Lentz algorithm; used for x >= 3.
double erfc_continued_fraction(double x) {
    constexpr double tiny = 1e-300;
    double f = x;
    double c = x;
    double d = 0.0;
    for (int n = 1; n < 5000; ++n) {
        const double a = 0.5 * n;
        d = x + a * d;
        if (std::abs(d) < tiny) d = tiny;
        c = x + a / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x * x) * std::numbers::inv_sqrtpi / f;
}

}  // namespace

double erf(double x) {
    if (std::isnan(x)) return x;
    if (x < 0.0) return -erf(-x);
    if (x < 3.0) return erf_series(x);
    return 1.0 - erfc_continued_fraction(x);
}

double erfc(double x) {
    if (std::isnan(x)) return x;
    if (x < 0.0) return 2.0 - erfc(-x);
    if (x < 3.0) return 1.0 - erf_series(x);
    return erfc_continued_fraction(x);
}

// ---------------------------------------------------------------------------

namespace {

QuadratureRule build_gauss_hermite(int n) {
    // Initial guesses from the Golub-Welsch tridiagonal matrix, then Newton
    // polishing on the orthonormal Hermite recurrence.
    SymmetricMatrix jac(static_cast<std::size_t>(n));
    for (int k = 1; k < n; ++k) jac.set(k - 1, k, std::sqrt(0.5 * k));
    const auto eig = symmetric_eigen(jac);

    const double p0 = std::pow(std::numbers::pi, -0.25);
    auto eval = [&](double x, double& pn, double& pn1, double& sumsq) {
        double prev = 0.0;
        double cur = p0;
        sumsq = cur * cur;
        for (int k = 0; k < n; ++k) {
            const double next = x * std::sqrt(2.0 / (k + 1)) * cur - std::sqrt(double(k) / (k + 1)) * prev;
            prev = cur;
            cur = next;
            if (k + 1 < n) sumsq += cur * cur;
        }
        pn = cur;
        pn1 = prev;
    };

    QuadratureRule rule;
    for (int i = 0; i < n; ++i) {
        double x = eig.values[i];
        double pn = 0, pn1 = 0, sumsq = 0;
        for (int it = 0; it < 20; ++it) {
            eval(x, pn, pn1, sumsq);
            const double dp = std::sqrt(2.0 * n) * pn1;
            const double step = pn / dp;
            x -= step;
            if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(x))) break;
        }
        eval(x, pn, pn1, sumsq);
        rule.nodes.push_back(x);
        rule.weights.push_back(1.0 / sumsq);
    }
    std::vector<std::size_t> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return rule.nodes[a] < rule.nodes[b]; });
    QuadratureRule sorted;
    for (auto i : idx) {
        sorted.nodes.push_back(rule.nodes[i]);
        sorted.weights.push_back(rule.weights[i]);
    }
    return sorted;
}

QuadratureRule build_gauss_legendre(int n) {
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int k = 0; k < n; ++k) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * k + 1.0) * x * p2 - k * p3) / (k + 1.0);
            }
            dp = n * (x * p1 - p2) / (x * x - 1.0);
            const double step = p1 / dp;
            x -= step;
            if (std::abs(step) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

template <typename Builder>
const QuadratureRule& cached_rule(std::map<int, QuadratureRule>& cache, std::mutex& mu, int order,
                                  Builder build) {
    if (order < 1) throw Error("quadrature order must be positive");
    std::lock_guard lock(mu);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, build(order)).first;
    return it->second;
}

}  // namespace

const QuadratureRule& gauss_hermite_rule(int order) {
    static std::map<int, QuadratureRule> cache;
    static std::mutex mu;
    return cached_rule(cache, mu, order, build_gauss_hermite);
}

const QuadratureRule& gauss_legendre_rule(int order) {
    static std::map<int, QuadratureRule> cache;
    static std::mutex mu;
    return cached_rule(cache, mu, order, build_gauss_legendre);
}

double gaussian_expectation(const std::function<double(double)>& f, double mean, double variance,
                            int order) {
    if (!(variance > 0.0)) throw Error("gaussian_expectation: variance must be positive");
    if (order < 2) throw Error("gaussian_expectation: order must be at least 2");
    const auto& rule = gauss_hermite_rule(order);
    const double scale = std::sqrt(2.0 * variance);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        s += rule.weights[i] * f(mean + scale * rule.nodes[i]);
    return s * std::numbers::inv_sqrtpi;
}

double integrate_panels(const std::function<double(double)>& f, std::vector<double> breakpoints,
                        int order) {
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
    const auto& rule = gauss_legendre_rule(order);
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < breakpoints.size(); ++k) {
        const double a = breakpoints[k];
        const double b = breakpoints[k + 1];
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        double s = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * f(mid + half * rule.nodes[i]);
        total += half * s;
    }
    return total;
}

// ---------------------------------------------------------------------------

SymmetricMatrix::SymmetricMatrix(const Matrix& m, double tol) : m_(m.rows(), m.cols()) {
    if (m.rows() != m.cols()) throw Error("SymmetricMatrix: matrix not square");
    double scale = 1.0;
    for (double v : m.data()) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i; j < m.cols(); ++j) {
            if (std::abs(m(i, j) - m(j, i)) > tol * scale) throw Error("SymmetricMatrix: matrix not symmetric");
            set(i, j, 0.5 * (m(i, j) + m(j, i)));
        }
}

EigenDecomposition symmetric_eigen(const SymmetricMatrix& sym) {
    const std::size_t n = sym.dimension();
    Matrix a = sym.matrix();
    Matrix v = Matrix::identity(n);
    const double total = std::max(frobenius_norm(a), std::numeric_limits<double>::min());

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) s += a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    for (int sweep = 0; sweep < 100 && off_norm() > 1e-14 * total; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                a(p, p) -= t * apq;
                a(q, q) += t * apq;
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = a(p, k) = c * akp - s * akq;
                    a(k, q) = a(q, k) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });
    EigenDecomposition out{Vector(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RandomStream::RandomStream(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t RandomStream::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RandomStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::size_t RandomStream::uniform_index(std::size_t n) {
    if (n == 0) throw Error("uniform_index: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
        r = next_u64();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
}

double RandomStream::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
}

int RandomStream::spin() { return (next_u64() >> 63) ? 1 : -1; }

RandomStream RandomStream::split() { return RandomStream(next_u64()); }

// ---------------------------------------------------------------------------

Vector finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                            std::span<const double> params, double h) {
    if (!(h > 0.0)) throw Error("finite_diff_gradient: step must be positive");
    Vector p(params.begin(), params.end());
    Vector g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double orig = p[i];
        p[i] = orig + h;
        const double fp = f(p);
        p[i] = orig - h;
        const double fm = f(p);
        p[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

double relative_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
    if (a.size() != b.size()) throw Error("relative_error: size mismatch");
    double diff = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) diff += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(diff) / std::max({norm(a), norm(b), floor});
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double xtol, int max_iter) {
    double flo = f(lo);
    const double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0)) throw Error("bisect: no sign change on bracket");
    for (int i = 0; i < max_iter && hi - lo > xtol; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

Estimate binomial_estimate(std::size_t successes, std::size_t trials) {
    if (trials == 0) throw Error("binomial_estimate: no trials");
    const double p = static_cast<double>(successes) / static_cast<double>(trials);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(trials))};
}

}  // namespace neuro
