#include "macrotensor/linalg.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace macrotensor {

Unfolded unfold_mode1(const Tensor3& t) {
    const auto& d = t.dims();
    const auto cols = static_cast<Eigen::Index>(d.slice());
    const auto rows = static_cast<Eigen::Index>(d.I);
    Unfolded u{Matrix(rows, cols), Mask(rows, cols)};
    // The buffer is row-major I x JK already.
    for (Eigen::Index i = 0; i < rows; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * d.slice();
        for (Eigen::Index c = 0; c < cols; ++c) {
            u.values(i, c) = t.value_at(base + static_cast<std::size_t>(c));
            u.mask(i, c) = t.observed_at(base + static_cast<std::size_t>(c));
        }
    }
    return u;
}

Tensor3 fold_mode1(const Matrix& values, const Mask& mask, Dims dims) {
    if (static_cast<std::size_t>(values.rows()) != dims.I ||
        static_cast<std::size_t>(values.cols()) != dims.slice() ||
        mask.rows() != values.rows() || mask.cols() != values.cols()) {
        throw std::invalid_argument("fold_mode1: matrix is not I x JK for the given dims");
    }
    std::vector<double> v(dims.size());
    std::vector<std::uint8_t> m(dims.size());
    std::size_t n = 0;
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index c = 0; c < values.cols(); ++c, ++n) {
            v[n] = values(i, c);
            m[n] = mask(i, c) ? 1 : 0;
        }
    }
    return Tensor3(dims, std::move(v), std::move(m));
}

Tensor3 fold_mode1(const Matrix& values, Dims dims) {
    return fold_mode1(values, Mask::Constant(values.rows(), values.cols(), true), dims);
}

Tensor3 permute_mode2(const Tensor3& t) {
    const auto& d = t.dims();
    Dims out{d.J, d.I, d.K};
    std::vector<double> v(d.size());
    std::vector<std::uint8_t> m(d.size());
    // y(j, i, k) at j*I*K + k*I + i
    for (std::size_t i = 0; i < d.I; ++i) {
        for (std::size_t k = 0; k < d.K; ++k) {
            for (std::size_t j = 0; j < d.J; ++j) {
                const std::size_t src = t.offset(i, j, k);
                const std::size_t dst = j * d.I * d.K + k * d.I + i;
                v[dst] = t.value_at(src);
                m[dst] = t.observed_at(src) ? 1 : 0;
            }
        }
    }
    return Tensor3(out, std::move(v), std::move(m));
}

Tensor3 permute_mode3(const Tensor3& t) {
    const auto& d = t.dims();
    Dims out{d.K, d.I, d.J};
    std::vector<double> v(d.size());
    std::vector<std::uint8_t> m(d.size());
    // y(k, i, j) at k*I*J + j*I + i
    for (std::size_t i = 0; i < d.I; ++i) {
        for (std::size_t k = 0; k < d.K; ++k) {
            for (std::size_t j = 0; j < d.J; ++j) {
                const std::size_t src = t.offset(i, j, k);
                const std::size_t dst = k * d.I * d.J + j * d.I + i;
                v[dst] = t.value_at(src);
                m[dst] = t.observed_at(src) ? 1 : 0;
            }
        }
    }
    return Tensor3(out, std::move(v), std::move(m));
}

Matrix unfold_mode2(const Matrix& x1, Dims d) {
    const auto I = static_cast<Eigen::Index>(d.I);
    const auto J = static_cast<Eigen::Index>(d.J);
    const auto K = static_cast<Eigen::Index>(d.K);
    Matrix out(J, I * K);
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index i = 0; i < I; ++i)
            out.col(k * I + i) = x1.row(i).segment(k * J, J).transpose();
    return out;
}

Matrix unfold_mode3(const Matrix& x1, Dims d) {
    const auto I = static_cast<Eigen::Index>(d.I);
    const auto J = static_cast<Eigen::Index>(d.J);
    const auto K = static_cast<Eigen::Index>(d.K);
    Matrix out(K, I * J);
    for (Eigen::Index j = 0; j < J; ++j)
        for (Eigen::Index i = 0; i < I; ++i)
            for (Eigen::Index k = 0; k < K; ++k) out(k, j * I + i) = x1(i, k * J + j);
    return out;
}

Matrix khatri_rao(const Matrix& c, const Matrix& b) {
    if (c.cols() != b.cols()) {
        throw std::invalid_argument("khatri_rao: column counts differ (" +
                                    std::to_string(c.cols()) + " vs " +
                                    std::to_string(b.cols()) + ")");
    }
    const Eigen::Index J = b.rows();
    const Eigen::Index K = c.rows();
    Matrix out(J * K, b.cols());
    for (Eigen::Index f = 0; f < b.cols(); ++f) {
        for (Eigen::Index k = 0; k < K; ++k) {
            out.col(f).segment(k * J, J) = b.col(f) * c(k, f);
        }
    }
    return out;
}

double pinv_rel_tol(const Matrix& m) {
    return 1e-12 * static_cast<double>(std::max(m.rows(), m.cols()));
}

Matrix pinv(const Matrix& m, std::size_t* rank) {
    if (m.size() == 0) {
        if (rank) *rank = 0;
        return Matrix::Zero(m.cols(), m.rows());
    }
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double cut = pinv_rel_tol(m) * (s.size() > 0 ? s(0) : 0.0);
    Vector inv = Vector::Zero(s.size());
    std::size_t r = 0;
    for (Eigen::Index n = 0; n < s.size(); ++n) {
        if (s(n) > cut && s(n) > 0.0) {
            inv(n) = 1.0 / s(n);
            ++r;
        }
    }
    if (rank) *rank = r;
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix pinv_solve(const Matrix& m, const Matrix& rhs) {
    if (rhs.rows() != m.rows()) {
        throw std::invalid_argument("pinv_solve: rhs row count does not match");
    }
    return pinv(m) * rhs;
}

Matrix masked_ls_rows(const Matrix& coef, const Matrix& data, const Mask& mask) {
    const Eigen::Index p = coef.rows();
    const Eigen::Index F = coef.cols();
    if (data.cols() != p || mask.rows() != data.rows() || mask.cols() != p) {
        throw std::invalid_argument("masked_ls_rows: shape mismatch");
    }
    Matrix out(data.rows(), F);
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        idx.clear();
        for (Eigen::Index c = 0; c < p; ++c) {
            if (mask(i, c)) idx.push_back(c);
        }
        if (static_cast<Eigen::Index>(idx.size()) < F) {
            throw std::invalid_argument("masked_ls_rows: row " + std::to_string(i) + " has " +
                                        std::to_string(idx.size()) +
                                        " observed entries, need at least " +
                                        std::to_string(F));
        }
        const auto n = static_cast<Eigen::Index>(idx.size());
        Matrix sub(n, F);
        Vector y(n);
        for (Eigen::Index r = 0; r < n; ++r) {
            sub.row(r) = coef.row(idx[static_cast<std::size_t>(r)]);
            y(r) = data(i, idx[static_cast<std::size_t>(r)]);
        }
        out.row(i) = (pinv(sub) * y).transpose();
    }
    return out;
}

Matrix reconstruct(const CpModel& model) {
    return model.A * khatri_rao(model.C, model.B).transpose();
}

double observed_sse(const Matrix& x, const Mask& mask, const Matrix& fit) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            if (!mask(i, c)) continue;
            const double r = x(i, c) - fit(i, c);
            s += r * r;
        }
    }
    return s;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
    }
    return out;
}

Mask select_rows(const Mask& m, std::span<const std::size_t> rows) {
    Mask out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
    }
    return out;
}

}  // namespace macrotensor
