#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>

#include "macrotensor/detect.hpp"
#include "macrotensor/simulation.hpp"
#include "test_util.hpp"

using namespace macrotensor;
using namespace testutil;

namespace {

Mask all_observed(const Matrix& x) { return Mask::Constant(x.rows(), x.cols(), true); }

}  // namespace

TEST_CASE("clean Gaussian data flags few cells") {
    Rng rng(100);
    const Matrix x = random_matrix(rng, 50, 100);
    const CellFlags f = detect_cells(x, all_observed(x));
    const double frac = double(f.cell_outliers.size()) / double(x.size());
    INFO("flagged fraction " << frac);
    CHECK(frac <= 0.03);
}

TEST_CASE("a single deviating cell in two correlated columns") {
    Rng rng(7);
    const Eigen::Index n = 60;
    Matrix x(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = 2.0 * x(i, 0) + 1.0;
    }
    const double original = x(9, 1);
    const CellFlags clean = detect_cells(x, all_observed(x));
    const double scale = clean.scale(1);
    x(9, 1) += 10.0 * scale;
    const CellFlags f = detect_cells(x, all_observed(x));
    REQUIRE(f.cell_outliers.size() == 1);
    CHECK(f.cell_outliers[0] == std::make_pair(std::size_t{9}, std::size_t{1}));
    CHECK(std::abs(f.imputed(9, 1) - original) <= 3.0 * f.scale(1));
}

TEST_CASE("constant input gives no flags") {
    const Matrix x = Matrix::Constant(20, 8, 4.5);
    const CellFlags f = detect_cells(x, all_observed(x));
    CHECK(f.cell_outliers.empty());
    CHECK(f.row_flags.empty());
    CHECK(f.imputed == x);
}

TEST_CASE("imputed agrees with observed unflagged cells and has no NA") {
    Rng rng(3);
    Matrix x = random_matrix(rng, 40, 30);
    Mask m = all_observed(x);
    for (int c = 0; c < 60; ++c) {
        const auto i = static_cast<Eigen::Index>(rng.below(40)), j = static_cast<Eigen::Index>(rng.below(30));
        m(i, j) = false;
        x(i, j) = Tensor3::kMissing;
    }
    for (int c = 0; c < 20; ++c) x(static_cast<Eigen::Index>(rng.below(40)), static_cast<Eigen::Index>(rng.below(30))) += 8.0;
    const CellFlags f = detect_cells(x, m);
    CHECK(f.imputed.allFinite());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            if (!m(i, j)) REQUIRE_FALSE(f.flagged(i, j));
            if (m(i, j) && !f.flagged(i, j)) REQUIRE(f.imputed(i, j) == x(i, j));
        }
    for (auto [i, j] : f.cell_outliers) CHECK(m(Eigen::Index(i), Eigen::Index(j)));
}

TEST_CASE("column-wise affine equivariance") {
    GeneratorOptions g;
    g.dims = Dims{30, 8, 6};
    ContaminationSpec s;
    s.rho = 0.0;
    s.eps_c = 0.1;
    s.nu = 0.05;
    s.seed = 5;
    const GeneratedData d = generate(s, g);
    const auto u = unfold_mode1(d.x);
    const CellFlags base = detect_cells(u.values, u.mask);
    Rng rng(9);
    Vector a(u.values.cols()), b(u.values.cols());
    for (Eigen::Index c = 0; c < a.size(); ++c) {
        a(c) = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.1 + 3.0 * rng.uniform());
        b(c) = 10.0 * rng.normal();
    }
    Matrix y = u.values;
    for (Eigen::Index c = 0; c < y.cols(); ++c)
        for (Eigen::Index i = 0; i < y.rows(); ++i)
            if (u.mask(i, c)) y(i, c) = a(c) * y(i, c) + b(c);
    const CellFlags t = detect_cells(y, u.mask);
    CHECK(t.cell_outliers == base.cell_outliers);
    CHECK(t.row_flags == base.row_flags);
    double worst = 0.0;
    for (Eigen::Index c = 0; c < y.cols(); ++c)
        for (Eigen::Index i = 0; i < y.rows(); ++i)
            worst = std::max(worst, std::abs(t.imputed(i, c) - (a(c) * base.imputed(i, c) + b(c))) /
                                        std::max(1.0, std::abs(t.imputed(i, c))));
    CHECK(worst <= 1e-8);
}

TEST_CASE("flags are monotone in cutoff_p") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        GeneratorOptions g;
        g.dims = Dims{40, 10, 8};
        ContaminationSpec s;
        s.rho = 0.0;
        s.eps_r = 0.1;
        s.eps_c = 0.1;
        s.gamma = 3;
        s.seed = seed;
        const GeneratedData d = generate(s, g);
        const auto u = unfold_mode1(d.x);
        DetectorOptions lo, hi;
        hi.cutoff_p = 0.999;
        const CellFlags a = detect_cells(u.values, u.mask, lo);
        const CellFlags b = detect_cells(u.values, u.mask, hi);
        const std::set<std::pair<std::size_t, std::size_t>> sa(a.cell_outliers.begin(), a.cell_outliers.end());
        for (const auto& c : b.cell_outliers) CHECK(sa.count(c) == 1);
    }
}

TEST_CASE("C10 cellwise outliers with gamma 7 are detected") {
    GeneratorOptions g;
    ContaminationSpec s = named_scenario("C10");
    s.seed = 42;
    const GeneratedData d = generate(s, g);
    const auto u = unfold_mode1(d.x);
    const CellFlags f = detect_cells(u.values, u.mask);
    std::size_t hit = 0;
    for (const auto& [i, j, k] : d.cell_outliers)
        hit += f.flagged(Eigen::Index(i), Eigen::Index(k * g.dims.J + j)) ? 1 : 0;
    const double rate = double(hit) / double(d.cell_outliers.size());
    INFO("detection rate " << rate);
    CHECK(rate >= 0.90);
}

TEST_CASE("argument checks") {
    CHECK_THROWS_AS(detect_cells(Matrix::Zero(3, 4), Mask::Constant(3, 4, true)), std::invalid_argument);
    CHECK_THROWS_AS(detect_cells(Matrix::Zero(5, 4), Mask::Constant(5, 3, true)), std::invalid_argument);
}

TEST_CASE("wrap_psi") {
    CHECK(wrap_psi(0.0) == 0.0);
    CHECK(wrap_psi(1.0) == 1.0);
    CHECK(wrap_psi(5.0) == 0.0);
    CHECK(wrap_psi(-2.0) == doctest::Approx(-wrap_psi(2.0)));
}
