#ifndef CONFOR_LINALG_HPP
#define CONFOR_LINALG_HPP

#include <cstddef>
#include <vector>

namespace confor {

using Vector = std::vector<double>;

// Dense row-major matrix, just large enough for the covariance and
// constraint algebra used here (n up to a few hundred).
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);
    static Matrix diagonal(const Vector& d);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    Matrix transposed() const;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

Vector matvec(const Matrix& a, const Vector& x);
Vector matvec_transposed(const Matrix& a, const Vector& x);  // A' x
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_at_b(const Matrix& a, const Matrix& b);        // A' B

// Strict lower-triangular Cholesky; throws std::domain_error unless positive
// definite.
Matrix cholesky_lower(const Matrix& v);

// Pivoted Cholesky for symmetric positive semi-definite matrices.
// Returns an n x rank factor S (rows in original order) with V ~= S S'.
struct PivotedCholesky {
    Matrix factor;
    std::size_t rank = 0;
};
PivotedCholesky pivoted_cholesky(const Matrix& v, double rel_tol = 1e-12);

std::size_t psd_rank(const Matrix& v, double rel_tol = 1e-10);

// Solves the square system A x = b by partially pivoted LU.
// Throws std::domain_error on (numerical) singularity.
Vector solve_dense(Matrix a, Vector b);

}  // namespace confor

#endif
