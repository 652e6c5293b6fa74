#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace vqb {

// Dense row-major matrix of doubles. The batch dimension always comes first,
// so distance and reduction loops stream contiguously. All quantities in this
// project (latent batches, codebooks, gradients) live in this type.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s);

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

// c = a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// c = a^T * b
Matrix matmul_at(const Matrix& a, const Matrix& b);
// c = a * b^T
Matrix matmul_bt(const Matrix& a, const Matrix& b);

// Squared Euclidean distance between two rows of equal length.
double sq_dist(std::span<const double> a, std::span<const double> b);

// Sum of squared entries.
double frobenius_sq(const Matrix& m);

// Largest absolute entry.
double max_abs(const Matrix& m);

// Entry (i,j) = squared Euclidean distance between a's row i and b's row j.
// Computed by direct per-pair subtraction, so entries are exactly >= 0 and
// the diagonal of pairwise_sq_dists(a, a) is exactly zero.
Matrix pairwise_sq_dists(const Matrix& a, const Matrix& b);

// Copies block `head` of a matrix whose columns are split into `num_heads`
// equal contiguous blocks.
Matrix head_block(const Matrix& m, std::size_t head, std::size_t num_heads);

// Writes `block` back into block `head` of `m`.
void set_head_block(Matrix& m, std::size_t head, std::size_t num_heads, const Matrix& block);

}  // namespace vqb
