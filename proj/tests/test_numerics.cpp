#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vqb/check.hpp"
#include "vqb/gradcheck.hpp"
#include "vqb/matrix.hpp"
#include "vqb/rng.hpp"

using namespace vqb;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("pairwise_sq_dists on hand values") {
    const Matrix a = Matrix::from_rows({{0.0, 0.0}});
    const Matrix b = Matrix::from_rows({{3.0, 4.0}});
    const Matrix d = pairwise_sq_dists(a, b);
    CHECK(d.rows() == 1);
    CHECK(d.cols() == 1);
    CHECK(d(0, 0) == doctest::Approx(25.0));

    const Matrix p = Matrix::from_rows({{1.0, 2.0}});
    CHECK(pairwise_sq_dists(p, p)(0, 0) == 0.0);
}

TEST_CASE("pairwise_sq_dists matches a per-pair scalar loop") {
    Rng rng(123);
    const Matrix a = random_matrix(7, 3, rng);
    const Matrix b = random_matrix(5, 3, rng);
    const Matrix d = pairwise_sq_dists(a, b);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
            double expected = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                const double diff = a(i, c) - b(j, c);
                expected += diff * diff;
            }
            CHECK(d(i, j) == doctest::Approx(expected).epsilon(1e-12));
            CHECK(d(i, j) >= 0.0);
        }
}

TEST_CASE("pairwise_sq_dists of a matrix with itself is symmetric with zero diagonal") {
    Rng rng(7);
    const Matrix a = random_matrix(9, 4, rng);
    const Matrix d = pairwise_sq_dists(a, a);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        CHECK(d(i, i) == 0.0);
        for (std::size_t j = 0; j < a.rows(); ++j) CHECK(d(i, j) == d(j, i));
    }
}

TEST_CASE("pairwise_sq_dists rejects dimension mismatch") {
    const Matrix a(2, 3);
    const Matrix b(2, 4);
    CHECK_THROWS_AS(pairwise_sq_dists(a, b), std::invalid_argument);
}

TEST_CASE("finite_diff_grad recovers analytic gradients") {
    const Matrix x = Matrix::from_rows({{1.0, 2.0}});
    const Matrix g = finite_diff_grad([](const Matrix& m) { return frobenius_sq(m); }, x, 1e-5);
    CHECK(std::abs(g(0, 0) - 2.0) < 1e-6);
    CHECK(std::abs(g(0, 1) - 4.0) < 1e-6);

    const Matrix zero = finite_diff_grad([](const Matrix&) { return 3.5; }, x, 1e-5);
    CHECK(max_abs(zero) == 0.0);

    Rng rng(99);
    const Matrix y = random_matrix(3, 4, rng);
    const Matrix gs = finite_diff_grad(
        [](const Matrix& m) {
            double s = 0.0;
            for (std::size_t i = 0; i < m.size(); ++i) s += std::sin(m.data()[i]);
            return s;
        },
        y, 1e-5);
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(std::abs(gs.data()[i] - std::cos(y.data()[i])) < 1e-8);
}

TEST_CASE("finite_diff_grad rejects non-finite evaluations") {
    const Matrix x(1, 1, 0.0);
    CHECK_THROWS_AS(
        finite_diff_grad([](const Matrix& m) { return std::log(m(0, 0)); }, x, 1e-3),
        numeric_error);
}

TEST_CASE("identical seeds give identical streams") {
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(42);
    Rng d(43);
    bool differ = false;
    for (int i = 0; i < 8 && !differ; ++i) differ = c.next_u64() != d.next_u64();
    CHECK(differ);
}

TEST_CASE("uniform stays in [0,1) and normal has sane moments") {
    Rng rng(5);
    double sum = 0.0, sum_sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double z = rng.normal();
        sum += z;
        sum_sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(std::abs(sum_sq / n - 1.0) < 0.05);
}

TEST_CASE("rng state round-trips") {
    Rng a(17);
    a.next_u64();
    Rng b(0);
    b.set_state(a.state());
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("head_block and set_head_block partition columns") {
    Rng rng(3);
    Matrix m = random_matrix(4, 6, rng);
    const Matrix b0 = head_block(m, 0, 3);
    const Matrix b2 = head_block(m, 2, 3);
    CHECK(b0.cols() == 2);
    CHECK(b0(1, 1) == m(1, 1));
    CHECK(b2(3, 0) == m(3, 4));

    Matrix copy = m;
    set_head_block(copy, 1, 3, head_block(m, 1, 3));
    CHECK(copy == m);
}
