#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace raftsplit {

/// Dense row-major matrix of doubles. Just enough linear algebra for
/// absorbing-chain work: products, inverses, and distribution propagation.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double value = 0.0);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }

    const std::vector<double>& entries() const noexcept { return entries_; }

    double row_sum(std::size_t r) const;
    /// Largest |entry|; 0 for an empty matrix.
    double max_abs() const;
    /// Max over rows of the sum of |entries| (the induced infinity norm).
    double inf_norm() const;
    bool is_row_stochastic(double tol) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> entries_;
};

/// A row vector of doubles; doubles as a probability distribution over
/// chain states when its entries are nonnegative and sum to one.
using RowVector = std::vector<double>;

Matrix mat_mul(const Matrix& a, const Matrix& b);

/// Inverse by Gauss-Jordan elimination with partial pivoting. A pivot of
/// magnitude below 1e-12 means the matrix is treated as singular
/// (std::domain_error).
Matrix mat_inverse(const Matrix& a);

/// Returns v, vP, vP^2, ..., vP^steps (steps+1 vectors). P must be square,
/// row-stochastic within 1e-12, and v a distribution of matching length;
/// every returned vector is again a distribution (mass preserved within
/// 1e-9 over the whole run).
std::vector<RowVector> propagate(const RowVector& v, const Matrix& p_matrix,
                                 std::size_t steps);

/// Upper bound on the spectral radius of a nonnegative square matrix:
/// min over m = 1, 2, 4, ... of ||Q^m||_inf^(1/m), powers taken by repeated
/// squaring. Returns 0 for an (effectively) nilpotent matrix, 1 for the
/// identity, and a value strictly below 1 whenever enough squarings show
/// decay. Never underestimates the true spectral radius.
double spectral_radius_bound(const Matrix& q);

/// True iff every entry of Q^m falls below tolerance for some visited
/// m <= max_power. Visits m = 1, 2, ..., 64 by sequential multiplication,
/// then doubles by squaring, so for max_power > 64 only powers of the form
/// 64 * 2^k are checked beyond the sequential range (conservative: a true
/// result is always trustworthy, a false one means no *visited* power
/// qualified).
bool verify_transience(const Matrix& q, double tolerance, std::size_t max_power);

} // namespace raftsplit
