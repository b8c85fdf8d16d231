#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "qdot/errors.hpp"

namespace qdot {

// Dense square matrix, row-major. The systems in this toolkit are tiny
// (ladder levels plus at most one dark state), so no sparse machinery.
class Matrix {
  public:
    Matrix() = default;
    explicit Matrix(std::size_t n) : n_(n), a_(n * n, 0.0) {}

    std::size_t size() const { return n_; }
    double& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

    static Matrix identity(std::size_t n) {
        Matrix m(n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    Matrix operator*(const Matrix& b) const {
        Matrix c(n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = 0; k < n_; ++k) {
                const double aik = (*this)(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < n_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    std::vector<double> operator*(const std::vector<double>& x) const {
        std::vector<double> y(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) y[i] += (*this)(i, j) * x[j];
        return y;
    }

    Matrix& operator+=(const Matrix& b) {
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += b.a_[i];
        return *this;
    }

    Matrix& operator*=(double s) {
        for (double& v : a_) v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

    double norm_inf() const {
        double m = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < n_; ++j) row += std::abs((*this)(i, j));
            m = std::max(m, row);
        }
        return m;
    }

  private:
    std::size_t n_ = 0;
    std::vector<double> a_;
};

namespace detail {

// LU factorization with partial pivoting, in place. Returns the pivot
// permutation; throws NumericsError when a pivot falls below tol.
inline std::vector<std::size_t> lu_factor(Matrix& a, double tol) {
    const std::size_t n = a.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::abs(a(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a(r, col)) > best) {
                best = std::abs(a(r, col));
                piv = r;
            }
        }
        if (best <= tol)
            throw NumericsError("singular matrix in linear solve (pivot " +
                                std::to_string(best) + ")");
        if (piv != col) {
            std::swap(perm[piv], perm[col]);
            for (std::size_t j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            a(r, col) = f;
            for (std::size_t j = col + 1; j < n; ++j) a(r, j) -= f * a(col, j);
        }
    }
    return perm;
}

inline std::vector<double> lu_solve_factored(const Matrix& lu,
                                             const std::vector<std::size_t>& perm,
                                             const std::vector<double>& b) {
    const std::size_t n = lu.size();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm[i]];
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) x[i] -= lu(i, j) * x[j];
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu(i, j) * x[j];
        x[i] /= lu(i, i);
    }
    return x;
}

} // namespace detail

// Solve A x = b by LU with partial pivoting.
inline std::vector<double> solve(Matrix a, const std::vector<double>& b,
                                 double pivot_tol = 0.0) {
    const double tol = pivot_tol > 0.0 ? pivot_tol : 1e-14 * std::max(1.0, a.norm_inf());
    const auto perm = detail::lu_factor(a, tol);
    return detail::lu_solve_factored(a, perm, b);
}

// Solve A X = B column by column (B given as a matrix).
inline Matrix solve(Matrix a, const Matrix& b, double pivot_tol = 0.0) {
    const std::size_t n = a.size();
    const double tol = pivot_tol > 0.0 ? pivot_tol : 1e-14 * std::max(1.0, a.norm_inf());
    const auto perm = detail::lu_factor(a, tol);
    Matrix x(n);
    std::vector<double> col(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = b(i, j);
        const auto sol = detail::lu_solve_factored(a, perm, col);
        for (std::size_t i = 0; i < n; ++i) x(i, j) = sol[i];
    }
    return x;
}

// Matrix exponential by scaling-and-squaring with a degree-13 Pade
// approximant. Accurate to near machine precision for the well-scaled
// generator matrices used here.
inline Matrix expm(const Matrix& a) {
    static const double b[] = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0,  129060195264000.0,   10559470521600.0,
        670442572800.0,      33522128640.0,       1323241920.0,
        40840800.0,          960960.0,            16380.0,
        182.0,               1.0};
    const std::size_t n = a.size();
    const double theta13 = 5.371920351148152;

    const double nrm = a.norm_inf();
    int squarings = 0;
    Matrix as = a;
    if (nrm > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(nrm / theta13)));
        as *= std::ldexp(1.0, -squarings);
    }

    const Matrix a2 = as * as;
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a4 * a2;

    Matrix u_inner = b[13] * a6 + b[11] * a4 + b[9] * a2;
    Matrix u = as * (a6 * u_inner + b[7] * a6 + b[5] * a4 + b[3] * a2 +
                     b[1] * Matrix::identity(n));
    Matrix v_inner = b[12] * a6 + b[10] * a4 + b[8] * a2;
    Matrix v = a6 * v_inner + b[6] * a6 + b[4] * a4 + b[2] * a2 +
               b[0] * Matrix::identity(n);

    Matrix num = v + u;
    Matrix den = v + (-1.0 * u);
    Matrix r = solve(std::move(den), num);
    for (int s = 0; s < squarings; ++s) r = r * r;
    return r;
}

} // namespace qdot
