#include "vqb/matrix.hpp"

#include <cmath>
#include <cstdlib>

#include "vqb/check.hpp"

namespace vqb {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t i = 0;
    for (const auto& r : rows) {
        VQB_REQUIRE(r.size() == m.cols_, "ragged row in Matrix::from_rows");
        std::size_t j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix& Matrix::operator+=(const Matrix& other) {
    VQB_REQUIRE(same_shape(other), "shape mismatch in Matrix::operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    VQB_REQUIRE(same_shape(other), "shape mismatch in Matrix::operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
    VQB_REQUIRE(a.cols() == b.rows(), "inner dimension mismatch in matmul");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
    VQB_REQUIRE(a.rows() == b.rows(), "inner dimension mismatch in matmul_at");
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
        }
    }
    return c;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    VQB_REQUIRE(a.cols() == b.cols(), "inner dimension mismatch in matmul_bt");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
            c(i, j) = s;
        }
    }
    return c;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff;
    }
    return s;
}

double frobenius_sq(const Matrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
    return s;
}

double max_abs(const Matrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s = std::max(s, std::abs(m.data()[i]));
    return s;
}

Matrix pairwise_sq_dists(const Matrix& a, const Matrix& b) {
    VQB_REQUIRE(a.cols() == b.cols(), "dimension mismatch in pairwise_sq_dists");
    Matrix d(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ai = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) d(i, j) = sq_dist(ai, b.row(j));
    }
    return d;
}

Matrix head_block(const Matrix& m, std::size_t head, std::size_t num_heads) {
    VQB_REQUIRE(num_heads >= 1 && m.cols() % num_heads == 0,
                "head count must divide the column dimension");
    VQB_REQUIRE(head < num_heads, "head index out of range");
    const std::size_t dh = m.cols() / num_heads;
    Matrix out(m.rows(), dh);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < dh; ++j) out(i, j) = m(i, head * dh + j);
    return out;
}

void set_head_block(Matrix& m, std::size_t head, std::size_t num_heads, const Matrix& block) {
    VQB_REQUIRE(num_heads >= 1 && m.cols() % num_heads == 0,
                "head count must divide the column dimension");
    VQB_REQUIRE(head < num_heads, "head index out of range");
    const std::size_t dh = m.cols() / num_heads;
    VQB_REQUIRE(block.rows() == m.rows() && block.cols() == dh,
                "block shape mismatch in set_head_block");
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < dh; ++j) m(i, head * dh + j) = block(i, j);
}

}  // namespace vqb
