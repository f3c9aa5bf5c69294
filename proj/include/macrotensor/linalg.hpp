#pragma once

#include <cstddef>
#include <span>

#include "macrotensor/tensor.hpp"

namespace macrotensor {

/// Mode-1 unfolding: X is I x JK with X(i, k*J + j) = x_ijk (0-based).
/// Unobserved cells are copied as NaN; consumers must use the mask.
struct Unfolded {
    Matrix values;
    Mask mask;
};

Unfolded unfold_mode1(const Tensor3& t);

/// Inverse of unfold_mode1. Throws std::invalid_argument when the matrix is
/// not I x JK.
Tensor3 fold_mode1(const Matrix& values, const Mask& mask, Dims dims);
/// Fully observed fold.
Tensor3 fold_mode1(const Matrix& values, Dims dims);

/// Tensor with axes permuted so that mode 2 (j) or mode 3 (k) becomes the
/// leading mode. permute_mode2 yields dims (J, I, K) with y_jik = x_ijk,
/// permute_mode3 yields dims (K, I, J) with y_kij = x_ijk.
Tensor3 permute_mode2(const Tensor3& t);
Tensor3 permute_mode3(const Tensor3& t);

/// Mode-2 and mode-3 unfoldings computed from a mode-1 unfolding `x1`:
/// X2 is J x IK with X2(j, k*I + i) = x_ijk, X3 is K x IJ with
/// X3(k, j*I + i) = x_ijk. These equal unfold_mode1 of permute_mode2/3.
Matrix unfold_mode2(const Matrix& x1, Dims dims);
Matrix unfold_mode3(const Matrix& x1, Dims dims);

/// Column f is vec(b_f c_f') (column-major), i.e. entry (k*J + j, f) is
/// b(j, f) * c(k, f). Throws on column-count mismatch.
Matrix khatri_rao(const Matrix& c, const Matrix& b);

/// Relative singular-value cutoff used by pinv: 1e-12 * max(rows, cols).
double pinv_rel_tol(const Matrix& m);

/// Moore-Penrose inverse through the SVD. Singular values below
/// pinv_rel_tol(m) * sigma_max are dropped. When `rank` is non-null it
/// receives the numerical rank.
Matrix pinv(const Matrix& m, std::size_t* rank = nullptr);

/// Minimum-norm least-squares solution m^+ * rhs.
Matrix pinv_solve(const Matrix& m, const Matrix& rhs);

/// Row-wise least squares on observed entries only: row i of the result
/// minimises sum over observed p of (data(i,p) - (coef * beta)_p)^2.
/// coef is p x F, data is n x p. Throws std::invalid_argument when a row
/// has fewer than F observed entries.
Matrix masked_ls_rows(const Matrix& coef, const Matrix& data, const Mask& mask);

/// A (C kr B)' as an I x JK matrix.
Matrix reconstruct(const CpModel& model);

/// Sum of squares of (x - fit) over observed cells of the unfolding.
double observed_sse(const Matrix& x, const Mask& mask, const Matrix& fit);

/// Rows of `m` picked by `rows`, in order.
Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows);
Mask select_rows(const Mask& m, std::span<const std::size_t> rows);

}  // namespace macrotensor
