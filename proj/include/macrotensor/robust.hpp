#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "macrotensor/tensor.hpp"

namespace macrotensor {

struct LocScale {
    double location = 0.0;
    double scale = 0.0;
};

struct RobustCov {
    Vector center;
    Matrix scatter;
    /// Indices of the optimal h-subset, ascending.
    std::vector<std::size_t> subset;
    /// Determinant of the raw (unscaled) subset covariance.
    double raw_determinant = 0.0;
};

// ---- distributions --------------------------------------------------------

/// Quantile of the chi-square distribution with `df` degrees of freedom.
/// Throws std::invalid_argument unless 0 < p < 1 and df >= 1.
double chi2_quantile(double df, double p);
double chi2_cdf(double df, double x);
/// Standard normal quantile. Throws unless 0 < p < 1.
double gauss_quantile(double p);

// ---- univariate helpers ---------------------------------------------------

/// Median; averages the two middle order statistics for even sizes.
double median(std::vector<double> x);
/// Weighted median: smallest value whose cumulative weight reaches half the
/// total, after sorting by (value, input position).
double weighted_median(std::span<const double> values, std::span<const double> weights);
/// Type-7 sample quantile.
double quantile(std::vector<double> x, double p);

/// Gaussian consistency multiplier for the univariate MCD scale at
/// coverage alpha = h/n: 1/sqrt(P(chi2_3 <= q) / alpha), q the chi2_1 alpha-quantile.
double unimcd_consistency(double alpha);

/// Exact univariate MCD: the window of h consecutive order statistics with
/// the smallest variance (ties to the lowest start). Location is the window
/// mean, scale its standard deviation (h-1 denominator) times
/// unimcd_consistency(h/n). Requires n >= 2 and ceil(n/2) < h <= n.
LocScale unimcd(std::span<const double> x, std::size_t h);

/// Tukey-biweight M-scale (c = 1.5476, b = 0.5) of x around its median,
/// iterated from the normalised MAD. Returns 0 when more than half the
/// values equal the median. Throws when fewer than two values are given.
double mscale(std::span<const double> x);

/// Cutoff for residual distances: (m + s * Phi^-1(0.99))^(3/2) with (m, s)
/// the univariate MCD of rd^(2/3) at subset size h. A negative base is clamped to 0.
double rd_cutoff(std::span<const double> rd, std::size_t h);

// ---- multivariate ---------------------------------------------------------

struct FastMcdOptions {
    std::size_t n_starts = 500;
    std::size_t initial_csteps = 2;
    std::size_t n_finalists = 10;
    std::size_t max_csteps = 100;
    std::uint64_t seed = 0;
};

/// FastMCD location/scatter of the rows of `data` (n x p). The returned
/// scatter is the subset covariance times the Gaussian consistency factor
/// alpha / P(chi2_{p+2} <= chi2_{p,alpha}). Throws std::invalid_argument on
/// size violations (n > 2p, ceil((n+p+1)/2) <= h <= n) and std::runtime_error
/// when every candidate subset has singular scatter.
RobustCov fastmcd(const Matrix& data, std::size_t h, const FastMcdOptions& opts = {});

/// One concentration step: the h rows with the smallest Mahalanobis
/// distance under the mean/covariance of `subset`, ascending by index.
/// Distance ties go to the lower row index.
std::vector<std::size_t> mcd_cstep(const Matrix& data, std::span<const std::size_t> subset,
                                   std::size_t h);
/// Determinant of the sample covariance (h-1 denominator) of the rows in subset.
double subset_covariance_det(const Matrix& data, std::span<const std::size_t> subset);

/// Mahalanobis distances of each row to (center, scatter). Throws on
/// singular scatter.
Vector mahalanobis(const Matrix& data, const Vector& center, const Matrix& scatter);

struct Outlyingness {
    Vector values;
    std::size_t valid_directions = 0;
    /// Directions skipped because the projected MCD scale was zero.
    std::size_t degenerate_directions = 0;
};

/// Projection outlyingness of the rows of `data` over `ndir` directions
/// through pairs of rows. Each direction is scored with the univariate MCD
/// (subset size h) of the projections; directions with zero scale are
/// skipped. When n(n-1)/2 <= ndir every pair is used. Throws
/// std::runtime_error when no direction is usable.
Outlyingness proj_outlyingness(const Matrix& data, std::size_t h, std::size_t ndir,
                               std::uint64_t seed);

}  // namespace macrotensor
