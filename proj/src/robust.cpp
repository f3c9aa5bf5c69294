#include "macrotensor/robust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "macrotensor/rng.hpp"

namespace macrotensor {

// ---- distributions --------------------------------------------------------

double chi2_quantile(double df, double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("chi2_quantile: p must lie in (0, 1), got " +
                                    std::to_string(p));
    }
    if (!(df > 0.0)) throw std::invalid_argument("chi2_quantile: df must be positive");
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(df), p);
}

double chi2_cdf(double df, double x) {
    if (!(df > 0.0)) throw std::invalid_argument("chi2_cdf: df must be positive");
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return boost::math::cdf(boost::math::chi_squared_distribution<double>(df), x);
}

double gauss_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("gauss_quantile: p must lie in (0, 1), got " +
                                    std::to_string(p));
    }
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

// ---- univariate helpers ---------------------------------------------------

double median(std::vector<double> x) {
    if (x.empty()) throw std::invalid_argument("median: empty input");
    const std::size_t n = x.size();
    auto mid = x.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(x.begin(), mid, x.end());
    double hi = *mid;
    if (n % 2 == 1) return hi;
    double lo = *std::max_element(x.begin(), mid);
    return 0.5 * (lo + hi);
}

double weighted_median(std::span<const double> values, std::span<const double> weights) {
    if (values.empty() || values.size() != weights.size()) {
        throw std::invalid_argument("weighted_median: empty input or size mismatch");
    }
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(values[a], a) < std::tie(values[b], b);
    });
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double cum = 0.0;
    for (std::size_t idx : order) {
        cum += weights[idx];
        if (cum >= 0.5 * total) return values[idx];
    }
    return values[order.back()];
}

double quantile(std::vector<double> x, double p) {
    if (x.empty()) throw std::invalid_argument("quantile: empty input");
    std::sort(x.begin(), x.end());
    const double h = (static_cast<double>(x.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

double unimcd_consistency(double alpha) {
    if (alpha >= 1.0) return 1.0;
    const double q = chi2_quantile(1.0, alpha);
    const double factor = chi2_cdf(3.0, q) / alpha;
    return 1.0 / std::sqrt(factor);
}

LocScale unimcd(std::span<const double> x, std::size_t h) {
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("unimcd: need at least two values");
    if (h > n || 2 * h <= n + (n % 2)) {
        throw std::invalid_argument("unimcd: h=" + std::to_string(h) +
                                    " outside (ceil(n/2), n] for n=" + std::to_string(n));
    }
    std::vector<double> y(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double shift = y[n / 2];
    // Windowed sums of shifted values.
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t t = 0; t < h; ++t) {
        const double v = y[t] - shift;
        s1 += v;
        s2 += v * v;
    }
    const double hd = static_cast<double>(h);
    double best = s2 - s1 * s1 / hd;
    std::size_t best_start = 0;
    for (std::size_t start = 1; start + h <= n; ++start) {
        const double out = y[start - 1] - shift;
        const double in = y[start + h - 1] - shift;
        s1 += in - out;
        s2 += in * in - out * out;
        const double ss = s2 - s1 * s1 / hd;
        if (ss < best) {
            best = ss;
            best_start = start;
        }
    }
    double mean = 0.0;
    for (std::size_t t = best_start; t < best_start + h; ++t) mean += y[t];
    mean /= hd;
    double ss = 0.0;
    for (std::size_t t = best_start; t < best_start + h; ++t) ss += (y[t] - mean) * (y[t] - mean);
    const double sd = std::sqrt(ss / (hd - 1.0));
    return {mean, sd * unimcd_consistency(hd / static_cast<double>(n))};
}

namespace {

constexpr double kBiweightC = 1.5476;
constexpr double kBiweightB = 0.5;

double rho_biweight(double u) {
    const double t = u / kBiweightC;
    if (std::abs(t) >= 1.0) return 1.0;
    const double w = 1.0 - t * t;
    return 1.0 - w * w * w;
}

}  // namespace

double mscale(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("mscale: need at least two values");
    const double med = median(std::vector<double>(x.begin(), x.end()));
    std::vector<double> r(n);
    std::size_t at_median = 0;
    for (std::size_t t = 0; t < n; ++t) {
        r[t] = std::abs(x[t] - med);
        if (r[t] == 0.0) ++at_median;
    }
    if (2 * at_median > n) return 0.0;
    double s = 1.4826 * median(r);
    if (s == 0.0) {
        s = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(n);
    }
    for (int it = 0; it < 100; ++it) {
        double mean_rho = 0.0;
        for (double v : r) mean_rho += rho_biweight(v / s);
        mean_rho /= static_cast<double>(n);
        const double next = s * std::sqrt(mean_rho / kBiweightB);
        const bool done = std::abs(next / s - 1.0) < 1e-10;
        s = next;
        if (done) break;
    }
    return s;
}

// ---- multivariate ---------------------------------------------------------

namespace {

struct SubsetMoments {
    Vector mean;
    Matrix cov;
};

SubsetMoments moments(const Matrix& data, std::span<const std::size_t> subset) {
    const auto p = data.cols();
    SubsetMoments m{Vector::Zero(p), Matrix::Zero(p, p)};
    for (std::size_t idx : subset) m.mean += data.row(static_cast<Eigen::Index>(idx)).transpose();
    m.mean /= static_cast<double>(subset.size());
    for (std::size_t idx : subset) {
        Vector d = data.row(static_cast<Eigen::Index>(idx)).transpose() - m.mean;
        m.cov += d * d.transpose();
    }
    m.cov /= static_cast<double>(subset.size()) - 1.0;
    return m;
}

bool is_singular(const Matrix& cov) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
    const Vector& ev = es.eigenvalues();
    const double hi = ev.cwiseAbs().maxCoeff();
    return !(hi > 0.0) || ev.minCoeff() <= 1e-12 * hi;
}

double mcd_factor(std::size_t n, std::size_t h, std::size_t p) {
    if (h >= n) return 1.0;
    const double alpha = static_cast<double>(h) / static_cast<double>(n);
    const double q = chi2_quantile(static_cast<double>(p), alpha);
    return alpha / chi2_cdf(static_cast<double>(p) + 2.0, q);
}

}  // namespace

Vector mahalanobis(const Matrix& data, const Vector& center, const Matrix& scatter) {
    Eigen::LLT<Matrix> llt(scatter);
    if (llt.info() != Eigen::Success || is_singular(scatter)) {
        throw std::runtime_error("mahalanobis: singular scatter matrix");
    }
    Matrix centered = data.rowwise() - center.transpose();
    Matrix z = llt.matrixL().solve(centered.transpose());
    return z.colwise().norm().transpose();
}

double subset_covariance_det(const Matrix& data, std::span<const std::size_t> subset) {
    return moments(data, subset).cov.determinant();
}

std::vector<std::size_t> mcd_cstep(const Matrix& data, std::span<const std::size_t> subset,
                                   std::size_t h) {
    const auto m = moments(data, subset);
    Vector d = mahalanobis(data, m.mean, m.cov);
    std::vector<std::size_t> order(static_cast<std::size_t>(data.rows()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(h), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          const auto ia = static_cast<Eigen::Index>(a);
                          const auto ib = static_cast<Eigen::Index>(b);
                          return std::tie(d(ia), a) < std::tie(d(ib), b);
                      });
    order.resize(h);
    std::sort(order.begin(), order.end());
    return order;
}

RobustCov fastmcd(const Matrix& data, std::size_t h, const FastMcdOptions& opts) {
    const auto n = static_cast<std::size_t>(data.rows());
    const auto p = static_cast<std::size_t>(data.cols());
    if (p == 0 || n <= 2 * p) {
        throw std::invalid_argument("fastmcd: need n > 2p (n=" + std::to_string(n) +
                                    ", p=" + std::to_string(p) + ")");
    }
    const std::size_t h_min = (n + p + 2) / 2;  // ceil((n+p+1)/2)
    if (h < h_min || h > n) {
        throw std::invalid_argument("fastmcd: h=" + std::to_string(h) + " outside [" +
                                    std::to_string(h_min) + ", " + std::to_string(n) + "]");
    }
    const double factor = mcd_factor(n, h, p);

    if (h == n) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        auto m = moments(data, all);
        if (is_singular(m.cov)) throw std::runtime_error("fastmcd: singular scatter");
        return {m.mean, m.cov * factor, all, m.cov.determinant()};
    }

    struct Candidate {
        double det;
        std::size_t start;
        std::vector<std::size_t> subset;
    };

    auto refine = [&](std::vector<std::size_t> subset, std::size_t steps, double& det) {
        det = subset_covariance_det(data, subset);
        for (std::size_t s = 0; s < steps; ++s) {
            if (is_singular(moments(data, subset).cov)) {
                det = 0.0;
                break;
            }
            auto next = mcd_cstep(data, subset, h);
            const double next_det = subset_covariance_det(data, next);
            const bool same = next == subset;
            subset = std::move(next);
            det = next_det;
            if (same) break;
        }
        return subset;
    };

    Rng rng(opts.seed);
    std::vector<Candidate> candidates;
    candidates.reserve(opts.n_starts);
    for (std::size_t start = 0; start < opts.n_starts; ++start) {
        std::vector<std::size_t> order = rng.permutation(n);
        std::size_t size = p + 1;
        std::vector<std::size_t> subset(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(size));
        while (is_singular(moments(data, subset).cov) && size < n) {
            subset.push_back(order[size++]);
        }
        if (is_singular(moments(data, subset).cov)) continue;
        // First C-step grows the elemental set to size h.
        auto grown = mcd_cstep(data, subset, h);
        double det = 0.0;
        grown = refine(std::move(grown), opts.initial_csteps > 0 ? opts.initial_csteps - 1 : 0, det);
        candidates.push_back({det, start, std::move(grown)});
    }
    if (candidates.empty()) throw std::runtime_error("fastmcd: singular scatter after all starts");

    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(a.det, a.start) < std::tie(b.det, b.start);
    });
    const std::size_t keep = std::min(opts.n_finalists, candidates.size());
    Candidate best{std::numeric_limits<double>::infinity(), 0, {}};
    for (std::size_t c = 0; c < keep; ++c) {
        double det = 0.0;
        auto subset = refine(candidates[c].subset, opts.max_csteps, det);
        if (det < best.det) best = {det, candidates[c].start, std::move(subset)};
    }
    auto m = moments(data, best.subset);
    if (!(best.det > 0.0) || is_singular(m.cov)) {
        throw std::runtime_error("fastmcd: singular scatter after all starts");
    }
    return {m.mean, m.cov * factor, best.subset, best.det};
}

Outlyingness proj_outlyingness(const Matrix& data, std::size_t h, std::size_t ndir,
                               std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(data.rows());
    if (n < 4) throw std::invalid_argument("proj_outlyingness: need at least 4 rows");
    if (data.cols() < 1) throw std::invalid_argument("proj_outlyingness: need at least 1 column");
    if (ndir < 1) throw std::invalid_argument("proj_outlyingness: ndir must be positive");

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    const std::size_t all_pairs = n * (n - 1) / 2;
    auto distinct_rows = [&](std::size_t a, std::size_t b) {
        return (data.row(static_cast<Eigen::Index>(a)) - data.row(static_cast<Eigen::Index>(b)))
                   .squaredNorm() > 0.0;
    };
    if (all_pairs <= ndir) {
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if (distinct_rows(a, b)) pairs.emplace_back(a, b);
    } else {
        Rng rng(seed);
        std::set<std::pair<std::size_t, std::size_t>> seen;
        const std::size_t max_attempts = 20 * ndir + 1000;
        for (std::size_t attempt = 0; attempt < max_attempts && pairs.size() < ndir; ++attempt) {
            std::size_t a = static_cast<std::size_t>(rng.below(n));
            std::size_t b = static_cast<std::size_t>(rng.below(n - 1));
            if (b >= a) ++b;
            auto key = std::minmax(a, b);
            if (!seen.insert(key).second) continue;
            if (!distinct_rows(a, b)) continue;
            pairs.emplace_back(a, b);
        }
    }

    Outlyingness out{Vector::Zero(static_cast<Eigen::Index>(n)), 0, 0};
    std::vector<double> proj(n);
    for (auto [a, b] : pairs) {
        Vector v = (data.row(static_cast<Eigen::Index>(a)) - data.row(static_cast<Eigen::Index>(b)))
                       .transpose();
        v /= v.norm();
        Vector pr = data * v;
        for (std::size_t i = 0; i < n; ++i) proj[i] = pr(static_cast<Eigen::Index>(i));
        const LocScale ls = unimcd(proj, h);
        if (!(ls.scale > 0.0)) {
            ++out.degenerate_directions;
            continue;
        }
        ++out.valid_directions;
        for (std::size_t i = 0; i < n; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            out.values(ii) = std::max(out.values(ii), std::abs(proj[i] - ls.location) / ls.scale);
        }
    }
    if (out.valid_directions == 0) {
        throw std::runtime_error("proj_outlyingness: no usable direction (all rows identical?)");
    }
    return out;
}

double rd_cutoff(std::span<const double> rd, std::size_t h) {
    std::vector<double> t(rd.size());
    for (std::size_t i = 0; i < rd.size(); ++i) t[i] = std::cbrt(rd[i] * rd[i]);
    const LocScale ls = unimcd(t, h);
    return std::pow(std::max(0.0, ls.location + ls.scale * gauss_quantile(0.99)), 1.5);
}

}  // namespace macrotensor
