#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>

#include "test_util.hpp"

using namespace macrotensor;
using namespace testutil;

TEST_CASE("unfold of a 1x1x1 tensor") {
    Tensor3 t(Dims{1, 1, 1});
    t.set(0, 0, 0, 7.0);
    const auto u = unfold_mode1(t);
    CHECK(u.values.rows() == 1);
    CHECK(u.values.cols() == 1);
    CHECK(u.values(0, 0) == 7.0);
    CHECK(u.mask(0, 0));
}

TEST_CASE("unfold column order is (k-1)J + j") {
    Tensor3 t(Dims{2, 2, 2});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t k = 0; k < 2; ++k) t.set(i, j, k, 100.0 * (i + 1) + 10.0 * (j + 1) + (k + 1));
    const auto u = unfold_mode1(t);
    CHECK(u.values(0, 0) == 111);
    CHECK(u.values(0, 1) == 121);
    CHECK(u.values(0, 2) == 112);
    CHECK(u.values(0, 3) == 122);
}

TEST_CASE("fold of a 1x1 matrix") {
    Matrix m(1, 1);
    m(0, 0) = 3.0;
    const Tensor3 t = fold_mode1(m, Dims{1, 1, 1});
    CHECK(t(0, 0, 0) == 3.0);
    CHECK(t.observed(0, 0, 0));
}

TEST_CASE("fold/unfold round trip is bitwise for all dims up to 5x5x5") {
    Rng rng(11);
    for (std::size_t I = 1; I <= 5; ++I)
        for (std::size_t J = 1; J <= 5; ++J)
            for (std::size_t K = 1; K <= 5; ++K) {
                const Tensor3 t = random_tensor(rng, Dims{I, J, K}, 0.3);
                const auto u = unfold_mode1(t);
                const Tensor3 back = fold_mode1(u.values, u.mask, t.dims());
                REQUIRE(back == t);
                for (std::size_t n = 0; n < t.size(); ++n) {
                    REQUIRE(back.observed_at(n) == t.observed_at(n));
                    if (t.observed_at(n)) REQUIRE(std::memcmp(&back.values()[n], &t.values()[n], sizeof(double)) == 0);
                }
            }
}

TEST_CASE("fold rejects a shape mismatch") {
    CHECK_THROWS_AS(fold_mode1(Matrix::Zero(2, 5), Dims{2, 2, 2}), std::invalid_argument);
    CHECK_THROWS_AS(fold_mode1(Matrix::Zero(3, 4), Dims{2, 2, 2}), std::invalid_argument);
}

TEST_CASE("mode-2 and mode-3 unfoldings agree with the permuted tensors") {
    Rng rng(5);
    const Tensor3 t = random_tensor(rng, Dims{3, 4, 5});
    const Matrix x1 = unfold_mode1(t).values;
    CHECK(unfold_mode2(x1, t.dims()) == unfold_mode1(permute_mode2(t)).values);
    CHECK(unfold_mode3(x1, t.dims()) == unfold_mode1(permute_mode3(t)).values);
}

TEST_CASE("khatri_rao hand examples") {
    Matrix b(2, 1), c(2, 1);
    b << 1, 3;
    c << 1, 0;
    Matrix expect(4, 1);
    expect << 1, 3, 0, 0;
    CHECK(khatri_rao(c, b) == expect);

    Matrix b2 = Matrix::Identity(2, 2);
    Matrix c2(2, 2);
    c2 << 1, 1, 0, 0;
    Matrix e2 = Matrix::Zero(4, 2);
    e2(0, 0) = 1;
    e2(1, 1) = 1;
    CHECK(khatri_rao(c2, b2) == e2);
}

TEST_CASE("khatri_rao equals the brute-force loop") {
    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const auto J = static_cast<Eigen::Index>(1 + rng.below(6));
        const auto K = static_cast<Eigen::Index>(1 + rng.below(6));
        const auto F = static_cast<Eigen::Index>(1 + rng.below(4));
        const Matrix b = random_matrix(rng, J, F);
        const Matrix c = random_matrix(rng, K, F);
        const Matrix kr = khatri_rao(c, b);
        for (Eigen::Index f = 0; f < F; ++f)
            for (Eigen::Index k = 0; k < K; ++k)
                for (Eigen::Index j = 0; j < J; ++j) REQUIRE(kr(k * J + j, f) == b(j, f) * c(k, f));
    }
    CHECK_THROWS_AS(khatri_rao(Matrix::Zero(3, 2), Matrix::Zero(4, 3)), std::invalid_argument);
}

TEST_CASE("pinv_solve") {
    Rng rng(8);
    const Matrix rhs = random_matrix(rng, 4, 3);
    CHECK((pinv_solve(Matrix::Identity(4, 4), rhs) - rhs).norm() == doctest::Approx(0.0));
    Matrix m(1, 1), r(1, 1);
    m << 2;
    r << 6;
    CHECK(pinv_solve(m, r)(0, 0) == doctest::Approx(3.0));
    const Matrix a = random_matrix(rng, 10, 3);
    const Matrix x = random_matrix(rng, 3, 1);
    CHECK((pinv_solve(a, a * x) - x).cwiseAbs().maxCoeff() <= 1e-10);
    // rank-deficient: minimum-norm solution of [1 1] beta = 2 is (1, 1)
    Matrix d(1, 2), y(1, 1);
    d << 1, 1;
    y << 2;
    const Matrix s = pinv_solve(d, y);
    CHECK(s(0, 0) == doctest::Approx(1.0));
    CHECK(s(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("masked_ls_rows") {
    Rng rng(9);
    const Matrix coef = random_matrix(rng, 6, 2);
    const Matrix data = random_matrix(rng, 4, 6);
    const Mask full = Mask::Constant(4, 6, true);
    const Matrix all = masked_ls_rows(coef, data, full);
    CHECK((all - (pinv(coef) * data.transpose()).transpose()).norm() <= 1e-12);
    // normal equations oracle
    const Matrix ne = (coef.transpose() * coef).ldlt().solve(coef.transpose() * data.transpose()).transpose();
    CHECK((all - ne).norm() <= 1e-10);

    // 3x2 system with one masked entry: the remaining two equations decide.
    Matrix c3(3, 2);
    c3 << 1, 0, 0, 1, 1, 1;
    Matrix d3(1, 3);
    d3 << 2, 5, 100;
    Mask m3(1, 3);
    m3 << true, true, false;
    const Matrix s = masked_ls_rows(c3, d3, m3);
    CHECK(s(0, 0) == doctest::Approx(2.0));
    CHECK(s(0, 1) == doctest::Approx(5.0));

    Mask few(1, 3);
    few << true, false, false;
    CHECK_THROWS_AS(masked_ls_rows(c3, d3, few), std::invalid_argument);
}

TEST_CASE("rank-F construction reproduces the tensor") {
    Rng rng(21);
    for (Eigen::Index F = 1; F <= 3; ++F) {
        const Matrix a = random_matrix(rng, 6, F), b = random_matrix(rng, 5, F), c = random_matrix(rng, 4, F);
        const Tensor3 t = rank_tensor(a, b, c);
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 5; ++j)
                for (std::size_t k = 0; k < 4; ++k) {
                    double s = 0.0;
                    for (Eigen::Index f = 0; f < F; ++f)
                        s += a(static_cast<Eigen::Index>(i), f) * b(static_cast<Eigen::Index>(j), f) *
                             c(static_cast<Eigen::Index>(k), f);
                    REQUIRE(t(i, j, k) == doctest::Approx(s).epsilon(1e-12));
                }
        CpModel m{a, b, c};
        const Matrix before = reconstruct(m);
        normalize(m);
        CHECK((reconstruct(m) - before).norm() / before.norm() <= 1e-10);
        for (Eigen::Index f = 0; f < F; ++f) {
            CHECK(m.B.col(f).norm() == doctest::Approx(1.0));
            CHECK(m.C.col(f).norm() == doctest::Approx(1.0));
            Eigen::Index ib = 0, ic = 0;
            m.B.col(f).cwiseAbs().maxCoeff(&ib);
            m.C.col(f).cwiseAbs().maxCoeff(&ic);
            CHECK(m.B(ib, f) > 0);
            CHECK(m.C(ic, f) > 0);
        }
    }
}

TEST_CASE("Tensor3 validation and missing cells") {
    CHECK_THROWS_AS(Tensor3(Dims{0, 1, 1}, {}, {}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor3(Dims{1, 1, 2}, {1.0}, {1}), std::invalid_argument);
    Tensor3 t(Dims{2, 2, 1});
    t.set_missing(1, 0, 0);
    CHECK(t.count_observed() == 3);
    CHECK_FALSE(t.complete());
    CHECK(std::isnan(t(1, 0, 0)));
}
