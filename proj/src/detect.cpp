#include "macrotensor/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "macrotensor/rng.hpp"
#include "macrotensor/robust.hpp"

namespace macrotensor {

namespace {

// Wrapping constants for b = 1.5, c = 4.
constexpr double kWrapB = 1.5;
constexpr double kWrapC = 4.0;
constexpr double kWrapQ1 = 1.540793;
constexpr double kWrapQ2 = 0.8622731;

// Residual scales below this (in standardised units) are treated as exact fits.
constexpr double kResidualScaleFloor = 1e-6;

// Same role for the row statistic, an average of probabilities.
constexpr double kRowScaleFloor = 1e-6;

constexpr std::size_t kCorrelationBlock = 256;

struct Neighbor {
    std::size_t col;
    double corr;
    double slope;
    double offset;
};

}  // namespace

double wrap_psi(double z) {
    const double a = std::abs(z);
    if (a < kWrapB) return z;
    if (a > kWrapC) return 0.0;
    return std::copysign(kWrapQ1 * std::tanh(kWrapQ2 * (kWrapC - a)), z);
}

CellFlags detect_cells(const Matrix& x, const Mask& mask, const DetectorOptions& opts) {
    const auto n = static_cast<std::size_t>(x.rows());
    const auto p = static_cast<std::size_t>(x.cols());
    if (n < 4) throw std::invalid_argument("detect_cells: need at least 4 rows");
    if (mask.rows() != x.rows() || mask.cols() != x.cols()) {
        throw std::invalid_argument("detect_cells: mask shape does not match data");
    }
    const double c_flag = std::sqrt(chi2_quantile(1.0, opts.cutoff_p));
    const double c_pre = std::sqrt(chi2_quantile(1.0, opts.prefilter_p));
    const auto N = static_cast<Eigen::Index>(n);
    const auto P = static_cast<Eigen::Index>(p);

    CellFlags out;
    out.center = Vector::Zero(P);
    out.scale = Vector::Zero(P);

    // 1. robust standardisation
    Matrix z = Matrix::Zero(N, P);
    std::vector<char> sparse(p, 0);
    std::vector<double> buf;
    buf.reserve(n);
    for (Eigen::Index c = 0; c < P; ++c) {
        buf.clear();
        for (Eigen::Index i = 0; i < N; ++i)
            if (mask(i, c)) buf.push_back(x(i, c));
        const std::size_t n_obs = buf.size();
        if (n_obs < 4 || 2 * n_obs < n) {
            sparse[static_cast<std::size_t>(c)] = 1;
            out.sparse_columns.push_back(static_cast<std::size_t>(c));
        }
        if (n_obs == 0) continue;
        out.center(c) = median(buf);
        out.scale(c) = n_obs >= 2 ? mscale(buf) : 0.0;
        if (out.scale(c) > 0.0) {
            for (Eigen::Index i = 0; i < N; ++i)
                if (mask(i, c)) z(i, c) = (x(i, c) - out.center(c)) / out.scale(c);
        }
    }

    // 2. univariate prefilter
    Mask usable = mask;
    for (Eigen::Index c = 0; c < P; ++c) {
        for (Eigen::Index i = 0; i < N; ++i) {
            if (sparse[static_cast<std::size_t>(c)] || std::abs(z(i, c)) > c_pre) usable(i, c) = false;
        }
    }

    // 3. neighbours from wrapped correlations
    Matrix u = Matrix::Zero(N, P);
    std::vector<char> active(p, 0);
    for (Eigen::Index c = 0; c < P; ++c) {
        if (sparse[static_cast<std::size_t>(c)]) continue;
        for (Eigen::Index i = 0; i < N; ++i)
            if (usable(i, c)) u(i, c) = wrap_psi(z(i, c));
        u.col(c).array() -= u.col(c).mean();
        const double norm = u.col(c).norm();
        if (norm > 0.0) {
            u.col(c) /= norm;
            active[static_cast<std::size_t>(c)] = 1;
        }
    }
    std::vector<std::size_t> candidates;
    for (std::size_t c = 0; c < p; ++c)
        if (active[c]) candidates.push_back(c);
    if (candidates.size() > opts.max_candidate_columns) {
        Rng rng(derive_seed(opts.seed, "detect/candidates"));
        auto pick = rng.sample(candidates.size(), opts.max_candidate_columns);
        std::sort(pick.begin(), pick.end());
        std::vector<std::size_t> sub;
        sub.reserve(pick.size());
        for (auto idx : pick) sub.push_back(candidates[idx]);
        candidates = std::move(sub);
    }
    const auto M = static_cast<Eigen::Index>(candidates.size());
    Matrix u_cand(N, M);
    for (Eigen::Index m = 0; m < M; ++m) u_cand.col(m) = u.col(static_cast<Eigen::Index>(candidates[static_cast<std::size_t>(m)]));

    std::vector<std::vector<Neighbor>> neighbors(p);
    std::vector<std::pair<double, std::size_t>> ranked;
    std::vector<double> ratios, pair_x, pair_y;
    ratios.reserve(n);
    for (std::size_t b0 = 0; b0 < p && M > 0; b0 += kCorrelationBlock) {
        const std::size_t bs = std::min(kCorrelationBlock, p - b0);
        Matrix r = u.middleCols(static_cast<Eigen::Index>(b0), static_cast<Eigen::Index>(bs)).transpose() * u_cand;
        for (std::size_t t = 0; t < bs; ++t) {
            const std::size_t c = b0 + t;
            if (!active[c]) continue;
            ranked.clear();
            for (Eigen::Index m = 0; m < M; ++m) {
                const std::size_t cc = candidates[static_cast<std::size_t>(m)];
                if (cc == c) continue;
                const double a = std::abs(r(static_cast<Eigen::Index>(t), m));
                if (a >= opts.min_correlation) ranked.emplace_back(a, cc);
            }
            const std::size_t keep = std::min(opts.max_neighbors, ranked.size());
            std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(),
                              [](const auto& a, const auto& b) {
                                  return a.first > b.first || (a.first == b.first && a.second < b.second);
                              });
            const auto ci = static_cast<Eigen::Index>(c);
            for (std::size_t k = 0; k < keep; ++k) {
                const std::size_t cc = ranked[k].second;
                const auto cci = static_cast<Eigen::Index>(cc);
                // ratios are taken around the medians of the shared rows so the
                // line carries an intercept
                pair_y.clear();
                pair_x.clear();
                for (Eigen::Index i = 0; i < N; ++i) {
                    if (usable(i, ci) && usable(i, cci)) {
                        pair_y.push_back(z(i, ci));
                        pair_x.push_back(z(i, cci));
                    }
                }
                if (pair_x.empty()) continue;
                const double my = median(pair_y);
                const double mx = median(pair_x);
                ratios.clear();
                for (std::size_t q = 0; q < pair_x.size(); ++q) {
                    if (pair_x[q] != mx) ratios.push_back((pair_y[q] - my) / (pair_x[q] - mx));
                }
                if (ratios.empty()) continue;
                const double slope = median(ratios);
                neighbors[c].push_back({cc, ranked[k].first, slope, my - slope * mx});
            }
        }
    }

    // 4. predictions
    Matrix zhat = Matrix::Zero(N, P);
    Mask has_pred = Mask::Constant(N, P, false);
    std::vector<double> vals;
    std::vector<double> wts;
    for (std::size_t c = 0; c < p; ++c) {
        const auto& nb = neighbors[c];
        if (nb.empty()) continue;
        const auto ci = static_cast<Eigen::Index>(c);
        for (Eigen::Index i = 0; i < N; ++i) {
            vals.clear();
            wts.clear();
            for (const auto& k : nb) {
                const auto cci = static_cast<Eigen::Index>(k.col);
                if (!usable(i, cci)) continue;
                vals.push_back(k.slope * z(i, cci) + k.offset);
                wts.push_back(k.corr);
            }
            if (vals.empty()) continue;
            zhat(i, ci) = weighted_median(vals, wts);
            has_pred(i, ci) = true;
        }
    }

    // 5. standardised residuals and cell flags
    out.std_residuals = Matrix::Zero(N, P);
    out.flagged = Mask::Constant(N, P, false);
    for (Eigen::Index c = 0; c < P; ++c) {
        buf.clear();
        for (Eigen::Index i = 0; i < N; ++i)
            if (mask(i, c) && has_pred(i, c)) buf.push_back(z(i, c) - zhat(i, c));
        double s = buf.size() >= 2 ? mscale(buf) : 0.0;
        s = std::max(s, kResidualScaleFloor);
        for (Eigen::Index i = 0; i < N; ++i) {
            if (!mask(i, c)) continue;
            const double d = has_pred(i, c) ? (z(i, c) - zhat(i, c)) / s : z(i, c);
            out.std_residuals(i, c) = d;
            if (std::abs(d) > c_flag) {
                out.flagged(i, c) = true;
                out.cell_outliers.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(c));
            }
        }
    }
    std::sort(out.cell_outliers.begin(), out.cell_outliers.end());

    // 6. row flags
    std::vector<double> t(n, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> t_obs;
    for (Eigen::Index i = 0; i < N; ++i) {
        double sum = 0.0;
        std::size_t cnt = 0;
        for (Eigen::Index c = 0; c < P; ++c) {
            if (!mask(i, c)) continue;
            const double d = out.std_residuals(i, c);
            sum += std::isfinite(d * d) ? chi2_cdf(1.0, d * d) : 1.0;
            ++cnt;
        }
        if (cnt > 0) {
            t[static_cast<std::size_t>(i)] = sum / static_cast<double>(cnt);
            t_obs.push_back(t[static_cast<std::size_t>(i)]);
        }
    }
    if (t_obs.size() >= 2) {
        const double med = median(t_obs);
        const double s = std::max(mscale(t_obs), kRowScaleFloor);
        for (std::size_t i = 0; i < n; ++i) {
            if (std::isfinite(t[i]) && (t[i] - med) / s > c_flag) out.row_flags.push_back(i);
        }
    }

    // 7. imputation
    out.predicted = Matrix(N, P);
    out.imputed = Matrix(N, P);
    for (Eigen::Index c = 0; c < P; ++c) {
        for (Eigen::Index i = 0; i < N; ++i) {
            const double pred = out.center(c) + out.scale(c) * zhat(i, c);
            out.predicted(i, c) = pred;
            out.imputed(i, c) = (!mask(i, c) || out.flagged(i, c)) ? pred : x(i, c);
        }
    }
    return out;
}

}  // namespace macrotensor
