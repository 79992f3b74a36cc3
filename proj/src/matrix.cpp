#include "raftsplit/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace raftsplit {

namespace {

constexpr double kPivotTolerance = 1e-12;
constexpr double kStochasticTolerance = 1e-12;

void require_square(const Matrix& m, const char* who) {
    if (m.rows() != m.cols())
        throw std::invalid_argument(std::string(who) + ": matrix must be square");
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double value)
    : rows_(rows), cols_(cols), entries_(rows * cols, value) {}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c)
            throw std::invalid_argument("Matrix::from_rows: ragged rows");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

double Matrix::row_sum(std::size_t r) const {
    double s = 0.0;
    for (std::size_t c = 0; c < cols_; ++c) s += (*this)(r, c);
    return s;
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double v : entries_) m = std::max(m, std::fabs(v));
    return m;
}

double Matrix::inf_norm() const {
    double worst = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols_; ++c) s += std::fabs((*this)(r, c));
        worst = std::max(worst, s);
    }
    return worst;
}

bool Matrix::is_row_stochastic(double tol) const {
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            const double v = (*this)(r, c);
            if (!std::isfinite(v) || v < -tol || v > 1.0 + tol) return false;
        }
        if (std::fabs(row_sum(r) - 1.0) > tol) return false;
    }
    return true;
}

Matrix mat_mul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("mat_mul: inner dimensions disagree");
    Matrix out(a.rows(), b.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j)
                out(i, j) += aik * b(k, j);
        }
    return out;
}

Matrix mat_inverse(const Matrix& a) {
    require_square(a, "mat_inverse");
    const std::size_t n = a.rows();
    Matrix work = a;
    Matrix inv = Matrix::identity(n);

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(work(r, col)) > std::fabs(work(pivot, col))) pivot = r;
        if (std::fabs(work(pivot, col)) < kPivotTolerance)
            throw std::domain_error("mat_inverse: matrix is singular or near-singular");
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) {
                std::swap(work(pivot, c), work(col, c));
                std::swap(inv(pivot, c), inv(col, c));
            }
        }
        const double d = work(col, col);
        for (std::size_t c = 0; c < n; ++c) {
            work(col, c) /= d;
            inv(col, c) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = work(r, col);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) {
                work(r, c) -= f * work(col, c);
                inv(r, c) -= f * inv(col, c);
            }
        }
    }
    return inv;
}

std::vector<RowVector> propagate(const RowVector& v, const Matrix& p_matrix,
                                 std::size_t steps) {
    require_square(p_matrix, "propagate");
    if (v.size() != p_matrix.rows())
        throw std::invalid_argument("propagate: vector length must match matrix size");
    if (!p_matrix.is_row_stochastic(kStochasticTolerance))
        throw std::invalid_argument("propagate: matrix is not row-stochastic");

    double mass = 0.0;
    for (double x : v) {
        if (!std::isfinite(x) || x < -kStochasticTolerance)
            throw std::invalid_argument("propagate: vector is not a distribution");
        mass += x;
    }
    if (std::fabs(mass - 1.0) > 1e-9)
        throw std::invalid_argument("propagate: vector mass is not 1");

    const std::size_t n = v.size();
    std::vector<RowVector> out;
    out.reserve(steps + 1);
    out.push_back(v);
    RowVector cur = v;
    RowVector next(n);
    for (std::size_t s = 0; s < steps; ++s) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double vi = cur[i];
            if (vi == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j)
                next[j] += vi * p_matrix(i, j);
        }
        cur = next;
        out.push_back(cur);
    }
    return out;
}

double spectral_radius_bound(const Matrix& q) {
    require_square(q, "spectral_radius_bound");
    for (double v : q.entries())
        if (!(v >= 0.0))
            throw std::invalid_argument("spectral_radius_bound: entries must be nonnegative");
    if (q.rows() == 0) return 0.0;

    double norm = q.inf_norm();
    if (norm == 0.0) return 0.0;
    double best = norm;

    Matrix power = q;
    double m = 1.0;
    for (int iter = 0; iter < 48; ++iter) {
        power = mat_mul(power, power);
        m *= 2.0;
        norm = power.inf_norm();
        if (norm == 0.0) return 0.0;  // nilpotent
        best = std::min(best, std::exp(std::log(norm) / m));
        // stop while the next squared norm is still a normal double, so no
        // estimate is ever taken from a subnormal (log loses precision there)
        if (norm < 1e-150 || norm > 1e100) break;
    }
    return best;
}

bool verify_transience(const Matrix& q, double tolerance, std::size_t max_power) {
    require_square(q, "verify_transience");
    if (!(tolerance > 0.0))
        throw std::invalid_argument("verify_transience: tolerance must be positive");
    if (max_power == 0)
        throw std::invalid_argument("verify_transience: max_power must be >= 1");
    if (q.rows() == 0) return true;

    Matrix power = q;
    std::size_t m = 1;
    while (m <= max_power) {
        if (power.max_abs() < tolerance) return true;
        if (m < 64) {
            power = mat_mul(power, q);
            ++m;
        } else {
            if (m > max_power / 2) break;  // doubling would overshoot
            power = mat_mul(power, power);
            m *= 2;
        }
    }
    return false;
}

} // namespace raftsplit
