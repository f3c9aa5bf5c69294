#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstring>
#include <set>

#include "macrotensor/macroparafac.hpp"
#include "macrotensor/simulation.hpp"
#include "test_util.hpp"

using namespace macrotensor;
using namespace testutil;

namespace {

GeneratedData small_data(const char* scenario, std::uint64_t seed, double noise = 0.2) {
    GeneratorOptions g;
    g.dims = Dims{30, 20, 15};
    g.noise = noise;
    ContaminationSpec s = named_scenario(scenario);
    s.seed = seed;
    return generate(s, g);
}

bool bit_equal(const Tensor3& a, const Tensor3& b) {
    if (!(a.dims() == b.dims()) || a.mask() != b.mask()) return false;
    return std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), std::size_t(a.size()) * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("default_h") {
    CHECK(default_h(50) == 39);
    CHECK(default_h(27) == 21);
    CHECK(default_h(4) == 3);
}

TEST_CASE("exact rank-2 data") {
    const GeneratedData d = small_data("U", 3, 0.0);
    MacroOptions o;
    o.rank = 2;
    o.seed = 1;
    o.fit.rel_tol = 1e-14;
    o.fit.max_iter = 5000;
    const MacroResult r = macroparafac(d.x, o);
    const double ss = unfold_mode1(d.x).values.squaredNorm();
    CHECK(r.loss <= 1e-12 * ss);
    CHECK(subspace_angle(r.model.B, d.truth.B) <= 1e-6);
    CHECK(subspace_angle(r.model.C, d.truth.C) <= 1e-6);
}

TEST_CASE("output invariants under mixed contamination") {
    const GeneratedData d = small_data("R10C10NA20", 8);
    MacroOptions o;
    o.rank = 2;
    o.seed = 5;
    const MacroResult r = macroparafac(d.x, o);
    const Dims dims = d.x.dims();
    const std::size_t I = dims.I;

    CHECK(r.h == default_h(I));
    CHECK(r.h0.size() == r.h);
    CHECK(std::is_sorted(r.h_star.begin(), r.h_star.end()));
    CHECK(r.h_star.size() >= 3);

    // rowwise_set is the complement of H*
    std::set<std::size_t> hs(r.h_star.begin(), r.h_star.end());
    std::set<std::size_t> rw(r.rowwise_set.begin(), r.rowwise_set.end());
    CHECK(hs.size() + rw.size() == I);
    for (auto i : rw) CHECK(hs.count(i) == 0);
    for (auto i : r.detector_rows) CHECK(hs.count(i) == 0);
    if (r.warnings.empty())
        for (auto i : r.detector_rows) CHECK(std::find(r.h0.begin(), r.h0.end(), i) == r.h0.end());

    // the cell set is exactly the stage-1 detector output
    const auto u = unfold_mode1(d.x);
    const CellFlags det = detect_cells(u.values, u.mask, o.detector);
    REQUIRE(det.cell_outliers.size() == r.cell_set.size());
    for (std::size_t n = 0; n < r.cell_set.size(); ++n) {
        const auto [i, j, k] = r.cell_set[n];
        CHECK(det.flagged(Eigen::Index(i), Eigen::Index(k * dims.J + j)));
    }
    std::set<std::size_t> flagged_off;
    for (const auto& [i, j, k] : r.cell_set) flagged_off.insert(d.x.offset(i, j, k));

    const Matrix xhat = r.model.A * khatri_rao(r.model.C, r.model.B).transpose();
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t k = 0; k < dims.K; ++k)
            for (std::size_t j = 0; j < dims.J; ++j) {
                const std::size_t off = d.x.offset(i, j, k);
                const bool obs = d.x.observed_at(off);
                const bool cell = flagged_off.count(off) == 1;
                const double fit = xhat(Eigen::Index(i), Eigen::Index(k * dims.J + j));
                REQUIRE(r.x_na.observed_at(off));
                REQUIRE(r.x_cell.observed_at(off));
                REQUIRE(r.x_full.observed_at(off));
                REQUIRE(r.residuals.observed_at(off) == obs);
                if (obs) {
                    REQUIRE(r.x_na.value_at(off) == d.x.value_at(off));
                    REQUIRE(r.residuals.value_at(off) == doctest::Approx(d.x.value_at(off) - fit));
                    if (!cell) {
                        REQUIRE(r.x_full.value_at(off) == d.x.value_at(off));
                        REQUIRE(r.x_cell.value_at(off) == d.x.value_at(off));
                    }
                } else {
                    REQUIRE(r.x_na.value_at(off) == doctest::Approx(fit));
                    REQUIRE(r.x_full.value_at(off) == doctest::Approx(fit));
                }
                if (rw.count(i)) REQUIRE(r.x_cell.value_at(off) == r.x_na.value_at(off));
                else REQUIRE(r.x_cell.value_at(off) == r.x_full.value_at(off));
            }
    CHECK(r.stage_log.size() == 6);
}

TEST_CASE("seed determinism is bitwise") {
    const GeneratedData d = small_data("R10C10NA10", 2);
    MacroOptions o;
    o.rank = 2;
    o.seed = 77;
    const MacroResult a = macroparafac(d.x, o);
    const MacroResult b = macroparafac(d.x, o);
    CHECK(bit_equal(a.model.A, b.model.A));
    CHECK(bit_equal(a.model.B, b.model.B));
    CHECK(bit_equal(a.model.C, b.model.C));
    CHECK(bit_equal(a.x_full, b.x_full));
    CHECK(bit_equal(a.x_cell, b.x_cell));
    CHECK(bit_equal(a.residuals, b.residuals));
    CHECK(a.h_star == b.h_star);
    CHECK(a.cell_set == b.cell_set);
    CHECK(std::memcmp(&a.loss, &b.loss, sizeof(double)) == 0);
}

TEST_CASE("rowwise outliers are excluded") {
    const GeneratedData d = small_data("R20", 4);
    MacroOptions o;
    o.rank = 2;
    o.seed = 3;
    const MacroResult r = macroparafac(d.x, o);
    for (auto i : d.row_outliers) CHECK(std::find(r.rowwise_set.begin(), r.rowwise_set.end(), i) != r.rowwise_set.end());
}

TEST_CASE("argument errors") {
    const GeneratedData d = small_data("U", 1);
    MacroOptions o;
    o.rank = 2;
    o.h = 15;  // not above ceil(I/2)
    CHECK_THROWS_AS(macroparafac(d.x, o), std::invalid_argument);
    o.h = 30;  // must be below I
    CHECK_THROWS_AS(macroparafac(d.x, o), std::invalid_argument);
    o.h = 0;
    o.rank = 0;
    CHECK_THROWS_AS(macroparafac(d.x, o), std::invalid_argument);
}
