#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "macrotensor/tensor.hpp"

namespace macrotensor {

struct DetectorOptions {
    /// Probability defining the flagging cutoff sqrt(chi2_1 quantile).
    double cutoff_p = 0.99;
    /// Probability defining the univariate prefilter cutoff. Kept separate
    /// from cutoff_p so the flagged set is monotone in cutoff_p.
    double prefilter_p = 0.99;
    std::size_t max_neighbors = 10;
    double min_correlation = 0.5;
    /// Neighbour search is restricted to a seeded column subsample above this size.
    std::size_t max_candidate_columns = 8000;
    std::uint64_t seed = 0;
};

/// Output of the cellwise detector on an n x p matrix.
struct CellFlags {
    /// Flagged cells as (row, col), row-major order. Never contains a missing cell.
    std::vector<std::pair<std::size_t, std::size_t>> cell_outliers;
    /// Suspicious rows, ascending.
    std::vector<std::size_t> row_flags;
    /// Input with missing and flagged cells replaced by predictions.
    Matrix imputed;
    /// Predictions for every cell, on the original scale.
    Matrix predicted;
    /// Dense form of cell_outliers.
    Mask flagged;
    /// Standardised cell residuals (0 at missing cells).
    Matrix std_residuals;
    /// Column centre and scale used for standardisation.
    Vector center;
    Vector scale;
    /// Columns handled by the univariate-only path (too many missing values).
    std::vector<std::size_t> sparse_columns;
};

/// Detects deviating cells of `x` (n x p, mask true = observed):
///  1. robust column standardisation (median / M-scale),
///  2. univariate prefilter at sqrt(chi2_1(prefilter_p)),
///  3. neighbour columns by wrapped correlation, robust slopes,
///  4. per-cell prediction as a correlation-weighted median,
///  5. flags where the standardised residual exceeds sqrt(chi2_1(cutoff_p)),
///  6. row flags from the robustly standardised mean chi2_1 CDF of squared residuals,
///  7. imputation of missing and flagged cells by the destandardised prediction.
/// Throws std::invalid_argument for fewer than 4 rows or shape mismatch.
CellFlags detect_cells(const Matrix& x, const Mask& mask, const DetectorOptions& opts = {});

/// Wrapping psi with b = 1.5, c = 4.
double wrap_psi(double z);

}  // namespace macrotensor
