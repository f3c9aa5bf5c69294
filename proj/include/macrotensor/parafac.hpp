#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "macrotensor/linalg.hpp"
#include "macrotensor/tensor.hpp"

namespace macrotensor {

struct FitOptions {
    std::size_t rank = 1;
    std::size_t max_iter = 500;
    /// Stop when the relative change of the loss drops below this.
    double rel_tol = 1e-8;
    std::size_t n_starts = 5;
    std::uint64_t seed = 0;
};

struct Loadings {
    Matrix B;
    Matrix C;
};

struct FitResult {
    CpModel model;
    /// Squared residual norm over observed cells.
    double loss = 0.0;
    std::size_t n_iter = 0;
    bool converged = false;
    std::vector<double> loss_trace;
    /// Set when a Khatri-Rao design matrix lost numerical rank during the run.
    bool rank_deficient = false;
    /// Start that produced this result.
    std::size_t start = 0;
};

struct IncompleteFit {
    FitResult fit;
    /// Input with every unobserved cell replaced by the final fitted value.
    Tensor3 imputed;
};

/// PARAFAC-ALS for a fully observed tensor. With `init`, start 0 uses the
/// given loadings and any further starts are random. Throws
/// std::invalid_argument for missing or non-finite cells.
FitResult als_complete(const Tensor3& t, const FitOptions& opts,
                       const std::optional<Loadings>& init = std::nullopt);

/// PARAFAC-ALS with missing-value updates: missing cells start from `na_init`
/// (I x JK, read only at unobserved cells) or the column means of the
/// unfolding, and after every sweep are replaced by the current fit. The loss
/// counts observed cells only. Throws std::invalid_argument when a slice in
/// any mode has fewer than rank observed cells.
IncompleteFit als_incomplete(const Tensor3& t, const FitOptions& opts,
                             const std::optional<Loadings>& init = std::nullopt,
                             const std::optional<Matrix>& na_init = std::nullopt);

/// Least-squares scores of complete rows (n x JK) given B and C.
Matrix score_rows(const Matrix& x_rows, const Matrix& b, const Matrix& c);

/// Random starting loadings: i.i.d. standard normal, columns normalised.
Loadings random_loadings(std::size_t J, std::size_t K, std::size_t rank, std::uint64_t seed);

}  // namespace macrotensor
