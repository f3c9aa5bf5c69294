#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "macrotensor/linalg.hpp"
#include "macrotensor/rng.hpp"
#include "macrotensor/tensor.hpp"

namespace testutil {

using namespace macrotensor;

inline Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
    return m;
}

// Random tensor; each cell missing with probability p_missing.
inline Tensor3 random_tensor(Rng& rng, Dims d, double p_missing = 0.0) {
    std::vector<double> v(d.size());
    std::vector<std::uint8_t> m(d.size(), 1);
    for (std::size_t n = 0; n < d.size(); ++n) {
        v[n] = rng.normal();
        if (rng.uniform() < p_missing) m[n] = 0;
    }
    return Tensor3(d, std::move(v), std::move(m));
}

// Exact rank-F tensor A (C kr B)'.
inline Tensor3 rank_tensor(const Matrix& a, const Matrix& b, const Matrix& c) {
    Dims d{static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(b.rows()),
           static_cast<std::size_t>(c.rows())};
    return fold_mode1(a * khatri_rao(c, b).transpose(), d);
}

// Angle between two lines spanned by vectors u, v.
inline double line_angle(const Vector& u, const Vector& v) {
    const double cs = std::abs(u.dot(v)) / (u.norm() * v.norm());
    return std::acos(std::min(1.0, cs));
}

}  // namespace testutil
