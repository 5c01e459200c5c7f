#include "confor/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace confor {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(const Vector& d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Vector matvec(const Matrix& a, const Vector& x) {
    if (x.size() != a.cols()) throw std::invalid_argument("matvec: size mismatch");
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* r = a.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

Vector matvec_transposed(const Matrix& a, const Vector& x) {
    if (x.size() != a.rows()) throw std::invalid_argument("matvec_transposed: size mismatch");
    Vector y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) y[j] += r[j] * x[i];
    }
    return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: size mismatch");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("matmul_at_b: size mismatch");
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k)
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
        }
    return c;
}

Matrix cholesky_lower(const Matrix& v) {
    if (v.rows() != v.cols()) throw std::invalid_argument("cholesky: matrix not square");
    const std::size_t n = v.rows();
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = v(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0) throw std::domain_error("cholesky: matrix not positive definite");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

PivotedCholesky pivoted_cholesky(const Matrix& v, double rel_tol) {
    if (v.rows() != v.cols()) throw std::invalid_argument("pivoted_cholesky: matrix not square");
    const std::size_t n = v.rows();
    Matrix a = v;
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
    const double tol = rel_tol * std::max(max_diag, 1e-300);

    Matrix l(n, n);
    std::size_t rank = 0;
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t p = j;
        for (std::size_t i = j + 1; i < n; ++i)
            if (a(i, i) > a(p, p)) p = i;
        if (a(p, p) <= tol) break;
        if (p != j) {
            for (std::size_t k = 0; k < n; ++k) std::swap(a(j, k), a(p, k));
            for (std::size_t k = 0; k < n; ++k) std::swap(a(k, j), a(k, p));
            for (std::size_t k = 0; k < j; ++k) std::swap(l(j, k), l(p, k));
            std::swap(perm[j], perm[p]);
        }
        const double piv = std::sqrt(a(j, j));
        l(j, j) = piv;
        for (std::size_t i = j + 1; i < n; ++i) l(i, j) = a(i, j) / piv;
        for (std::size_t i = j + 1; i < n; ++i)
            for (std::size_t k = j + 1; k <= i; ++k) {
                a(i, k) -= l(i, j) * l(k, j);
                a(k, i) = a(i, k);
            }
        ++rank;
    }

    PivotedCholesky out;
    out.rank = rank;
    out.factor = Matrix(n, rank);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < rank; ++j) out.factor(perm[i], j) = l(i, j);
    return out;
}

std::size_t psd_rank(const Matrix& v, double rel_tol) {
    return pivoted_cholesky(v, rel_tol).rank;
}

Vector solve_dense(Matrix a, Vector b) {
    if (a.rows() != a.cols() || a.rows() != b.size())
        throw std::invalid_argument("solve_dense: size mismatch");
    const std::size_t n = a.rows();
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(a(i, j)));
    if (scale == 0.0) throw std::domain_error("solve_dense: zero matrix");

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t p = col;
        for (std::size_t i = col + 1; i < n; ++i)
            if (std::abs(a(i, col)) > std::abs(a(p, col))) p = i;
        if (std::abs(a(p, col)) <= 1e-13 * scale)
            throw std::domain_error("solve_dense: singular matrix");
        if (p != col) {
            for (std::size_t k = 0; k < n; ++k) std::swap(a(col, k), a(p, k));
            std::swap(b[col], b[p]);
        }
        for (std::size_t i = col + 1; i < n; ++i) {
            const double f = a(i, col) / a(col, col);
            if (f == 0.0) continue;
            for (std::size_t k = col; k < n; ++k) a(i, k) -= f * a(col, k);
            b[i] -= f * b[col];
        }
    }
    Vector x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a(i, k) * x[k];
        x[i] = s / a(i, i);
    }
    return x;
}

}  // namespace confor
