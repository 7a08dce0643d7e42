#include <doctest.h>

#include <cmath>

#include "lcmito/matcore.hpp"
#include "lcmito/rng.hpp"

using lcmito::RngStream;
using lcmito::matcore::condition_estimate;
using lcmito::matcore::kron;
using lcmito::matcore::mat_exp;
using lcmito::matcore::Matrix;
using lcmito::matcore::solve;
using lcmito::matcore::svd_clip;

namespace {

Matrix random_matrix(int rows, int cols, RngStream& rs, double scale = 1.0) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = scale * rs.normal();
    }
    return m;
}

}  // namespace

TEST_SUITE("matcore") {

TEST_CASE("mat_exp of the zero matrix is the identity") {
    for (int d : {1, 3, 6}) {
        const Matrix e = mat_exp(Matrix::Zero(d, d), 1.0);
        CHECK((e - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-15));
    }
}

TEST_CASE("mat_exp matches the scalar exponential") {
    Matrix a(1, 1);
    a << -1.0;
    const Matrix e = mat_exp(a, 0.1);
    // exp(-0.1) from the scalar series
    CHECK(e(0, 0) == doctest::Approx(0.90483741803595957).epsilon(1e-12));
}

TEST_CASE("mat_exp of a nilpotent matrix truncates the series") {
    Matrix a(2, 2);
    a << 0, 1, 0, 0;
    const Matrix e = mat_exp(a, 1.0);
    Matrix expected(2, 2);
    expected << 1, 1, 0, 1;
    CHECK((e - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("mat_exp rejects bad input") {
    CHECK_THROWS_AS(mat_exp(Matrix::Zero(2, 3), 1.0), lcmito::ValidationError);
    Matrix bad = Matrix::Zero(2, 2);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(mat_exp(bad, 1.0), lcmito::ValidationError);
}

TEST_CASE("mat_exp semigroup property on random inputs") {
    RngStream rs(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 2 + static_cast<int>(rs.uniform_below(4));
        const Matrix a = random_matrix(d, d, rs);
        const double s = 4.0 * rs.uniform() - 2.0;
        const double t = 4.0 * rs.uniform() - 2.0;
        const Matrix lhs = mat_exp(a, s) * mat_exp(a, t);
        const Matrix rhs = mat_exp(a, s + t);
        CHECK((lhs - rhs).norm() <= 1e-9 * std::max(1.0, rhs.norm()));
    }
}

TEST_CASE("svd_clip leaves the identity alone") {
    const Matrix c = svd_clip(Matrix::Identity(3, 3), 1.0, 3.0);
    CHECK((c - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("svd_clip clamps a diagonal matrix") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = 5.0;
    a(1, 1) = 0.5;
    const Matrix c = svd_clip(a, 1.0, 3.0);
    CHECK(c(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(c(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(c(0, 1)) < 1e-12);
    CHECK(std::abs(c(1, 0)) < 1e-12);
}

TEST_CASE("svd_clip output has singular values inside the box") {
    RngStream rs(22);
    const Matrix a = random_matrix(4, 4, rs, 2.0);
    const Matrix c = svd_clip(a, 0.5, 2.0);
    // Recompute the SVD of the output as an independent check.
    const Eigen::JacobiSVD<Matrix> svd(c);
    for (int i = 0; i < 4; ++i) {
        CHECK(svd.singularValues()(i) >= 0.5 - 1e-10 * 2.0);
        CHECK(svd.singularValues()(i) <= 2.0 + 1e-10 * 2.0);
    }
}

TEST_CASE("svd_clip is idempotent") {
    RngStream rs(33);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix a = random_matrix(3, 3, rs, 3.0);
        const Matrix once = svd_clip(a, 1.0, 3.0);
        const Matrix twice = svd_clip(once, 1.0, 3.0);
        CHECK((once - twice).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("svd_clip rejects lo > hi") {
    CHECK_THROWS_AS(svd_clip(Matrix::Identity(2, 2), 3.0, 1.0), lcmito::ValidationError);
}

TEST_CASE("kron of identities is the identity") {
    const Matrix k = kron(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    CHECK((k - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("kron matches the hand expansion") {
    Matrix a(1, 2);
    a << 1, 2;
    Matrix b(2, 1);
    b << 3, 4;
    const Matrix k = kron(a, b);
    REQUIRE(k.rows() == 2);
    REQUIRE(k.cols() == 2);
    CHECK(k(0, 0) == doctest::Approx(3.0));
    CHECK(k(0, 1) == doctest::Approx(6.0));
    CHECK(k(1, 0) == doctest::Approx(4.0));
    CHECK(k(1, 1) == doctest::Approx(8.0));
}

TEST_CASE("kron with a zero factor is zero") {
    RngStream rs(44);
    const Matrix b = random_matrix(3, 2, rs);
    CHECK(kron(Matrix::Zero(2, 2), b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kron mixed-product property") {
    RngStream rs(55);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix a = random_matrix(2, 3, rs);
        const Matrix b = random_matrix(3, 2, rs);
        const Matrix c = random_matrix(3, 2, rs);
        const Matrix d = random_matrix(2, 3, rs);
        const Matrix lhs = kron(a, b) * kron(c, d);
        const Matrix rhs = kron(Matrix(a * c), Matrix(b * d));
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("solve with the identity returns the right-hand side") {
    RngStream rs(66);
    const Matrix b = random_matrix(3, 2, rs);
    CHECK((solve(Matrix::Identity(3, 3), b) - b).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("solve inverts a diagonal matrix") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = 2.0;
    a(1, 1) = 4.0;
    const Matrix x = solve(a, Matrix::Identity(2, 2));
    CHECK(x(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(x(1, 1) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("solve residual on random well-conditioned systems") {
    RngStream rs(77);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix a = random_matrix(5, 5, rs) + 3.0 * Matrix::Identity(5, 5);
        const Matrix b = random_matrix(5, 3, rs);
        const Matrix x = solve(a, b);
        CHECK((a * x - b).norm() / b.norm() <= 1e-10);
    }
}

TEST_CASE("solve rejects singular systems with a condition estimate") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = 1.0;
    CHECK_THROWS_AS(solve(a, Matrix::Identity(2, 2)), lcmito::NumericError);
    CHECK(condition_estimate(a) == std::numeric_limits<double>::infinity());
}

}  // TEST_SUITE
