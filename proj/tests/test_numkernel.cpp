#include <doctest.h>

#include <cmath>
#include <random>

#include "e2efs/numkernel.hpp"
#include "oracles.hpp"

using namespace e2efs;

TEST_CASE("matmul: identity and hand arithmetic") {
    const Matrix a{{1, 2}, {3, 4}};
    CHECK(matmul(Matrix::identity(2), a) == a);
    const Matrix r = matmul(a, Matrix{{1}, {1}});
    CHECK(r == Matrix{{3}, {7}});
}

TEST_CASE("matmul: matches triple loop oracle") {
    std::mt19937_64 rng(7);
    const Matrix a = oracle::random_matrix(5, 7, rng);
    const Matrix b = oracle::random_matrix(7, 3, rng);
    const Matrix got = matmul(a, b);
    const Matrix want = oracle::triple_loop_matmul(a, b);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-12));

    const Matrix tn = matmul_tn(b, a.transpose());
    const Matrix want_t = want.transpose();
    for (std::size_t i = 0; i < tn.size(); ++i) CHECK(std::fabs(tn.data()[i] - want_t.data()[i]) < 1e-12);
    const Matrix nt = matmul_nt(a, b.transpose());
    for (std::size_t i = 0; i < nt.size(); ++i) CHECK(std::fabs(nt.data()[i] - want.data()[i]) < 1e-12);
}

TEST_CASE("matmul: dimension mismatch names both shapes") {
    try {
        (void)matmul(Matrix(2, 3), Matrix(2, 3));
        FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
        CHECK(msg.find("and 2x3") != std::string::npos);
    }
}

TEST_CASE("matmul: associative within 1e-9 relative") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix a = oracle::random_matrix(4, 6, rng);
        const Matrix b = oracle::random_matrix(6, 5, rng);
        const Matrix c = oracle::random_matrix(5, 3, rng);
        const Matrix l = matmul(matmul(a, b), c);
        const Matrix r = matmul(a, matmul(b, c));
        for (std::size_t i = 0; i < l.size(); ++i)
            CHECK(oracle::rel_error(l.data()[i], r.data()[i], 1e-12) < 1e-9);
    }
}

TEST_CASE("erf: tabulated values and symmetry") {
    CHECK(e2efs::erf(0.0) == 0.0);
    CHECK(e2efs::erf(1.0) == doctest::Approx(0.8427007929).epsilon(1e-10));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-8.0, 8.0);
    for (int i = 0; i < 100; ++i) {
        const double x = u(rng);
        CHECK(e2efs::erf(-x) == -e2efs::erf(x));
    }
}

TEST_CASE("erf: within 1e-7 of a long double series oracle") {
    double worst = 0.0;
    for (double x = -5.0; x <= 5.0; x += 0.01) {
        worst = std::max(worst, std::fabs(e2efs::erf(x) - oracle::erf_series_ld(x)));
    }
    CHECK(worst < 1e-7);
    // And against the C library over a wider range.
    for (double x = -10.0; x <= 10.0; x += 0.0173) CHECK(std::fabs(e2efs::erf(x) - std::erf(x)) < 1e-14);
}

TEST_CASE("erf: monotone and bounded") {
    double prev = e2efs::erf(-7.0);
    for (double x = -7.0; x <= 7.0; x += 1e-3) {
        const double v = e2efs::erf(x);
        CHECK(v >= prev);
        CHECK(std::fabs(v) <= 1.0);
        if (std::fabs(x) < 5.0) CHECK(std::fabs(v) < 1.0);
        prev = v;
    }
}

TEST_CASE("norms") {
    const Vector z{0, 0, 0}, s{1, -1, 1}, h{0.5, 0.5};
    CHECK(l1_norm(z) == 0.0);
    CHECK(l2_norm_sq(z) == 0.0);
    CHECK(l1_norm(s) == 3.0);
    CHECK(l2_norm_sq(s) == 3.0);
    CHECK(l1_norm(h) == 1.0);
    CHECK(l2_norm_sq(h) == 0.5);
}

TEST_CASE("non-finite values are rejected") {
    CHECK_FALSE(all_finite(Vector{1.0, NAN}));
    CHECK_THROWS_AS(require_finite(Vector{INFINITY}, "x"), std::domain_error);
    CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>(3)), std::invalid_argument);
}
