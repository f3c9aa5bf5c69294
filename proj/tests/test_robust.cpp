#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "macrotensor/robust.hpp"
#include "test_util.hpp"

using namespace macrotensor;
using namespace testutil;

namespace {

// Calls f on every k-subset of [0, n) in lexicographic order.
template <class F>
void for_each_subset(std::size_t n, std::size_t k, F&& f) {
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        f(idx);
        std::size_t pos = k;
        while (pos > 0 && idx[pos - 1] == n - k + pos - 1) --pos;
        if (pos == 0) return;
        ++idx[pos - 1];
        for (std::size_t q = pos; q < k; ++q) idx[q] = idx[q - 1] + 1;
    }
}

double variance_of(const std::vector<double>& x, const std::vector<std::size_t>& sub, double& mean) {
    mean = 0.0;
    for (auto i : sub) mean += x[i];
    mean /= static_cast<double>(sub.size());
    double ss = 0.0;
    for (auto i : sub) ss += (x[i] - mean) * (x[i] - mean);
    return ss / static_cast<double>(sub.size() - 1);
}

// Exhaustive MCD: subset with the smallest covariance determinant.
std::vector<std::size_t> exhaustive_mcd(const Matrix& data, std::size_t h) {
    std::vector<std::size_t> best;
    double best_det = std::numeric_limits<double>::infinity();
    for_each_subset(static_cast<std::size_t>(data.rows()), h, [&](const std::vector<std::size_t>& s) {
        const double d = subset_covariance_det(data, s);
        if (d < best_det) {
            best_det = d;
            best = s;
        }
    });
    return best;
}

double chi2_cdf_df4(double x) { return 1.0 - std::exp(-x / 2.0) * (1.0 + x / 2.0); }

double bisect(double lo, double hi, const std::function<double(double)>& f, double target) {
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("unimcd hand examples") {
    const std::vector<double> c{5, 5, 5, 5};
    const LocScale a = unimcd(c, 3);
    CHECK(a.location == doctest::Approx(5.0));
    CHECK(a.scale == 0.0);

    const std::vector<double> x{1, 2, 3, 100};
    const LocScale b = unimcd(x, 3);
    CHECK(b.location == doctest::Approx(2.0));
    CHECK(b.scale == doctest::Approx(1.0 * unimcd_consistency(0.75)));
}

TEST_CASE("unimcd matches the exhaustive subset search") {
    Rng rng(17);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t n = 4 + rng.below(9);  // 4..12
        const std::size_t lo = (n + 1) / 2 + 1;
        const std::size_t h = lo + rng.below(n - lo + 1);
        std::vector<double> x(n);
        for (auto& v : x) v = rng.normal() + (rng.uniform() < 0.2 ? 10.0 : 0.0);
        double best = std::numeric_limits<double>::infinity(), best_mean = 0.0;
        for_each_subset(n, h, [&](const std::vector<std::size_t>& s) {
            double m = 0.0;
            const double v = variance_of(x, s, m);
            if (v < best - 1e-12) {
                best = v;
                best_mean = m;
            }
        });
        const LocScale ls = unimcd(x, h);
        INFO("n=" << n << " h=" << h);
        CHECK(ls.location == doctest::Approx(best_mean).epsilon(1e-10));
        CHECK(ls.scale == doctest::Approx(std::sqrt(best) * unimcd_consistency(double(h) / double(n))).epsilon(1e-10));
    }
}

TEST_CASE("unimcd is affine equivariant") {
    Rng rng(2);
    std::vector<double> x(40);
    for (auto& v : x) v = rng.normal();
    const LocScale base = unimcd(x, 30);
    for (double a : {2.5, -0.3}) {
        std::vector<double> y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i] + 7.0;
        const LocScale t = unimcd(y, 30);
        CHECK(t.location == doctest::Approx(a * base.location + 7.0).epsilon(1e-10));
        CHECK(t.scale == doctest::Approx(std::abs(a) * base.scale).epsilon(1e-10));
    }
    CHECK_THROWS_AS(unimcd(x, 20), std::invalid_argument);
    CHECK_THROWS_AS(unimcd(x, 41), std::invalid_argument);
}

TEST_CASE("mscale") {
    const std::vector<double> c(10, 3.0);
    CHECK(mscale(c) == 0.0);
    Rng rng(4);
    std::vector<double> x(10000);
    for (auto& v : x) v = rng.normal();
    CHECK(std::abs(mscale(x) - 1.0) <= 0.05);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = -3.0 * x[i] + 1.0;
    CHECK(mscale(y) == doctest::Approx(3.0 * mscale(x)).epsilon(1e-8));
    const std::vector<double> one{1.0};
    CHECK_THROWS(mscale(one));
}

TEST_CASE("median, weighted median and quantile") {
    CHECK(median({3, 1, 2}) == 2.0);
    CHECK(median({4, 1, 2, 3}) == 2.5);
    const std::vector<double> v{1, 2, 3}, w{1, 1, 5};
    CHECK(weighted_median(v, w) == 3.0);
    CHECK(quantile({1, 2, 3, 4, 5}, 0.25) == doctest::Approx(2.0));
    CHECK(quantile({1, 2}, 0.5) == doctest::Approx(1.5));
}

TEST_CASE("fastmcd finds the exhaustive optimum with two outliers") {
    Rng rng(31);
    Matrix x = random_matrix(rng, 20, 2);
    x.row(3) << 15.0, 15.0;
    x.row(11) << -12.0, 14.0;
    const std::size_t h = 15;
    const auto best = exhaustive_mcd(x, h);
    const RobustCov r = fastmcd(x, h, FastMcdOptions{.seed = 1});
    CHECK(r.subset == best);
    CHECK(std::find(r.subset.begin(), r.subset.end(), 3) == r.subset.end());
    CHECK(std::find(r.subset.begin(), r.subset.end(), 11) == r.subset.end());

    Vector mean = Vector::Zero(2);
    for (auto i : best) mean += x.row(static_cast<Eigen::Index>(i)).transpose();
    mean /= double(h);
    Matrix cov = Matrix::Zero(2, 2);
    for (auto i : best) {
        const Vector d = x.row(static_cast<Eigen::Index>(i)).transpose() - mean;
        cov += d * d.transpose();
    }
    cov /= double(h - 1);
    const double alpha = double(h) / 20.0;
    const double q = boost::math::quantile(boost::math::chi_squared(2.0), alpha);
    const double factor = alpha / boost::math::cdf(boost::math::chi_squared(4.0), q);
    CHECK((r.center - mean).norm() <= 1e-10);
    CHECK((r.scatter - factor * cov).norm() <= 1e-10 * cov.norm());
}

TEST_CASE("fastmcd is affine equivariant (exhaustive-checked)") {
    Rng rng(5);
    for (int rep = 0; rep < 5; ++rep) {
        const Matrix x = random_matrix(rng, 12, 2);
        const std::size_t h = 8;
        Matrix a(2, 2);
        a << 2.0, 0.5, -1.0, 3.0;
        Vector b(2);
        b << 4.0, -1.0;
        const Matrix y = (x * a.transpose()).rowwise() + b.transpose();
        const auto best = exhaustive_mcd(x, h);
        const RobustCov rx = fastmcd(x, h, FastMcdOptions{.seed = 7});
        const RobustCov ry = fastmcd(y, h, FastMcdOptions{.seed = 7});
        CHECK(rx.subset == best);
        CHECK(ry.subset == rx.subset);
        CHECK((ry.center - (a * rx.center + b)).norm() <= 1e-9);
        CHECK((ry.scatter - a * rx.scatter * a.transpose()).norm() <= 1e-9 * ry.scatter.norm());
    }
}

TEST_CASE("C-steps never increase the covariance determinant") {
    Rng rng(13);
    for (int rep = 0; rep < 30; ++rep) {
        const Matrix x = random_matrix(rng, 40, 3);
        const std::size_t h = 25;
        std::vector<std::size_t> sub = rng.sample(40, h);
        std::sort(sub.begin(), sub.end());
        double det = subset_covariance_det(x, sub);
        for (int it = 0; it < 20; ++it) {
            sub = mcd_cstep(x, sub, h);
            const double next = subset_covariance_det(x, sub);
            REQUIRE(next <= det * (1.0 + 1e-12));
            det = next;
        }
    }
}

TEST_CASE("fastmcd argument checks") {
    Rng rng(1);
    const Matrix x = random_matrix(rng, 6, 3);
    CHECK_THROWS_AS(fastmcd(x, 5), std::invalid_argument);  // n <= 2p
    const Matrix y = random_matrix(rng, 20, 2);
    CHECK_THROWS_AS(fastmcd(y, 10), std::invalid_argument);
    CHECK_THROWS_AS(fastmcd(y, 21), std::invalid_argument);
}

TEST_CASE("mahalanobis with identity scatter is Euclidean") {
    Rng rng(6);
    const Matrix x = random_matrix(rng, 10, 3);
    const Vector c = Vector::Ones(3);
    const Vector d = mahalanobis(x, c, Matrix::Identity(3, 3));
    for (Eigen::Index i = 0; i < 10; ++i) CHECK(d(i) == doctest::Approx((x.row(i).transpose() - c).norm()));
    CHECK_THROWS(mahalanobis(x, c, Matrix::Zero(3, 3)));
}

TEST_CASE("proj_outlyingness") {
    SUBCASE("identical rows") {
        const Matrix x = Matrix::Ones(10, 3);
        CHECK_THROWS_AS(proj_outlyingness(x, 6, 50, 1), std::runtime_error);
    }
    SUBCASE("one column equals the standardised distance") {
        Rng rng(3);
        Matrix x = random_matrix(rng, 15, 1);
        std::vector<double> v(15);
        for (int i = 0; i < 15; ++i) v[std::size_t(i)] = x(i, 0);
        const LocScale ls = unimcd(v, 10);
        const Outlyingness o = proj_outlyingness(x, 10, 500, 2);
        for (int i = 0; i < 15; ++i) CHECK(o.values(i) == doctest::Approx(std::abs(x(i, 0) - ls.location) / ls.scale));
    }
    SUBCASE("rotation invariant") {
        Rng rng(8);
        const Matrix x = random_matrix(rng, 12, 2);
        const double th = 0.7;
        Matrix r(2, 2);
        r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
        const Outlyingness a = proj_outlyingness(x, 8, 1000, 1);
        const Outlyingness b = proj_outlyingness(x * r.transpose(), 8, 1000, 1);
        CHECK((a.values - b.values).norm() <= 1e-9 * a.values.norm());
    }
    SUBCASE("a shifted row is the most outlying") {
        Rng rng(12);
        Matrix x = random_matrix(rng, 30, 4);
        x.row(17).array() += 8.0;
        const Outlyingness o = proj_outlyingness(x, 20, 250, 3);
        Eigen::Index arg = 0;
        o.values.maxCoeff(&arg);
        CHECK(arg == 17);
    }
}

TEST_CASE("chi-square and normal quantiles") {
    CHECK(std::sqrt(chi2_quantile(1, 0.998)) == doctest::Approx(3.0902323).epsilon(1e-6));
    CHECK(std::sqrt(chi2_quantile(1, 0.99)) == doctest::Approx(2.5758293).epsilon(1e-6));
    for (double p : {0.1, 0.5, 0.9, 0.99, 0.999}) {
        CHECK(chi2_quantile(2, p) == doctest::Approx(-2.0 * std::log(1.0 - p)).epsilon(1e-10));
        const double q4 = bisect(0.0, 200.0, chi2_cdf_df4, p);
        CHECK(chi2_quantile(4, p) == doctest::Approx(q4).epsilon(1e-9));
        CHECK(chi2_cdf(4, q4) == doctest::Approx(p).epsilon(1e-9));
    }
    auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    const double z99 = bisect(-10.0, 10.0, phi, 0.99);
    CHECK(gauss_quantile(0.99) == doctest::Approx(z99).epsilon(1e-10));
    CHECK(gauss_quantile(0.99) == doctest::Approx(2.326348).epsilon(1e-6));
    for (double p : {0.01, 0.2, 0.4}) CHECK(gauss_quantile(p) == doctest::Approx(-gauss_quantile(1.0 - p)));
    double prev = -1.0, prevz = -1e9;
    for (int s = 1; s < 100; ++s) {
        const double p = s / 100.0;
        const double q = chi2_quantile(3, p);
        const double z = gauss_quantile(p);
        CHECK(q > prev);
        CHECK(z > prevz);
        prev = q;
        prevz = z;
    }
    CHECK_THROWS_AS(chi2_quantile(1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(chi2_quantile(0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(gauss_quantile(0.0), std::invalid_argument);
}

TEST_CASE("rd_cutoff") {
    Rng rng(10);
    std::vector<double> rd(200);
    for (auto& v : rd) v = std::abs(rng.normal()) + 1.0;
    std::vector<double> t(rd.size());
    for (std::size_t i = 0; i < rd.size(); ++i) t[i] = std::pow(rd[i], 2.0 / 3.0);
    const LocScale ls = unimcd(t, 150);
    CHECK(rd_cutoff(rd, 150) == doctest::Approx(std::pow(ls.location + ls.scale * 2.3263478740, 1.5)).epsilon(1e-9));
    const std::vector<double> zeros(10, 0.0);
    CHECK(rd_cutoff(zeros, 8) == 0.0);
}
