#pragma once

// Shared numerical kernels: dense matrices, special functions, quadrature,
// the Jacobi eigensolver, a seeded random stream and the finite-difference
// gradient oracle used by every gradient test.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace neuro {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    Matrix transpose() const;
    Vector operator*(std::span<const double> x) const;
    Matrix operator*(const Matrix& other) const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
/// Largest absolute entry of a - b.
double max_abs_diff(std::span<const double> a, std::span<const double> b);
double frobenius_norm(const Matrix& m);

/// Solves A x = b by LU decomposition with partial pivoting.
/// Throws SingularMatrixError when a pivot falls below `pivot_tol` times the
/// largest entry of A.
Vector solve_linear(const Matrix& a, std::span<const double> b, double pivot_tol = 1e-13);
Matrix inverse(const Matrix& a, double pivot_tol = 1e-13);

class SingularMatrixError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Special functions

/// Error function, absolute error below 1e-15 on |x| <= 6.
/// Series expansion for |x| < 3, continued fraction for erfc beyond.
double erf(double x);
/// Complementary error function 1 - erf(x), accurate in the far tail.
double erfc(double x);

// ---------------------------------------------------------------------------
// Quadrature

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Hermite rule for the weight exp(-x^2). Nodes ascending.
const QuadratureRule& gauss_hermite_rule(int order);
/// Gauss-Legendre rule on [-1, 1]. Nodes ascending.
const QuadratureRule& gauss_legendre_rule(int order);

/// E[f(z)] for z ~ N(mean, variance) by Gauss-Hermite quadrature.
/// Exact for polynomials of degree < 2 * order.
double gaussian_expectation(const std::function<double(double)>& f, double mean,
                            double variance, int order = 60);

/// Composite Gauss-Legendre integral of f over the panels delimited by the
/// sorted, de-duplicated `breakpoints`.
double integrate_panels(const std::function<double(double)>& f, std::vector<double> breakpoints,
                        int order = 20);

// ---------------------------------------------------------------------------
// Linear algebra

/// Symmetric matrix stored densely; construction enforces exact symmetry.
class SymmetricMatrix {
public:
    explicit SymmetricMatrix(std::size_t n) : m_(n, n) {}
    /// Throws if `m` is not square or not symmetric to within `tol`;
    /// the stored matrix is the exact symmetrisation (m + m^T) / 2.
    explicit SymmetricMatrix(const Matrix& m, double tol = 1e-12);

    std::size_t dimension() const { return m_.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
    void set(std::size_t i, std::size_t j, double value) {
        m_(i, j) = value;
        m_(j, i) = value;
    }
    const Matrix& matrix() const { return m_; }

private:
    Matrix m_;
};

struct EigenDecomposition {
    Vector values;   ///< descending
    Matrix vectors;  ///< column k is the eigenvector of values[k]
};

/// Cyclic Jacobi rotations; iterates until the off-diagonal Frobenius norm
/// drops below 1e-14 times the matrix norm.
EigenDecomposition symmetric_eigen(const SymmetricMatrix& m);

// ---------------------------------------------------------------------------
// Randomness

/// xoshiro256** seeded through splitmix64. The algorithm is fixed so that a
/// seed reproduces the same stream on every platform. Single owner; parallel
/// code must use one stream per worker with distinct seeds.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). Unbiased (rejection sampling).
    std::size_t uniform_index(std::size_t n);
    /// Standard normal via the Box-Muller transform.
    double gaussian();
    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }
    /// +1 or -1 with equal probability.
    int spin();
    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Derives an independent stream, e.g. one per restart or per trial.
    RandomStream split();

private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Gradient oracle

/// Central differences (f(p + h e_i) - f(p - h e_i)) / (2h) for each component.
Vector finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                            std::span<const double> params, double h = 1e-5);

/// |a - b| / max(|a|, |b|, floor); the floor keeps near-zero gradients from
/// turning rounding noise into large relative errors.
double relative_error(double a, double b, double floor = 1e-8);
/// |a - b| / max(|a|, |b|, floor) in the Euclidean norm.
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8);

// ---------------------------------------------------------------------------
// Root finding

/// Bisection on a sign change of f over [lo, hi]. Throws if f(lo) and f(hi)
/// have the same strict sign.
double bisect(const std::function<double(double)>& f, double lo, double hi, double xtol = 1e-15,
              int max_iter = 400);

/// Statistics helpers used by Monte-Carlo estimators.
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Binomial estimate with standard error sqrt(p(1-p)/n).
Estimate binomial_estimate(std::size_t successes, std::size_t trials);

}  // namespace neuro
