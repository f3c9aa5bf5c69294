#include "macrotensor/parafac.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "macrotensor/parallel.hpp"
#include "macrotensor/rng.hpp"

namespace macrotensor {

namespace {

struct StartResult {
    FitResult fit;
    Matrix filled;  // I x JK, unobserved cells hold the final fit
};

// Least-squares factor update: rows of `unfolded` regressed on `design`.
Matrix ls_update(const Matrix& unfolded, const Matrix& design, std::size_t rank, bool& deficient) {
    std::size_t r = 0;
    Matrix pi = pinv(design, &r);
    if (r < rank) deficient = true;
    return unfolded * pi.transpose();
}

void rescale(Matrix& loadings, Matrix& other) {
    for (Eigen::Index f = 0; f < loadings.cols(); ++f) {
        const double norm = loadings.col(f).norm();
        if (norm > 0.0 && std::isfinite(norm)) {
            loadings.col(f) /= norm;
            other.col(f) *= norm;
        }
    }
}

StartResult run_start(const Matrix& x1, const Mask& mask, bool has_missing, Matrix filled,
                      Dims dims, Loadings init, const FitOptions& opts, std::size_t start) {
    const std::size_t F = opts.rank;
    StartResult res;
    FitResult& fit = res.fit;
    fit.start = start;
    Matrix B = std::move(init.B);
    Matrix C = std::move(init.C);
    Matrix A;

    Matrix x2;
    Matrix x3;
    if (!has_missing) {
        x2 = unfold_mode2(filled, dims);
        x3 = unfold_mode3(filled, dims);
    }
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t it = 1; it <= opts.max_iter; ++it) {
        if (has_missing) {
            x2 = unfold_mode2(filled, dims);
            x3 = unfold_mode3(filled, dims);
        }
        A = ls_update(filled, khatri_rao(C, B), F, fit.rank_deficient);
        B = ls_update(x2, khatri_rao(C, A), F, fit.rank_deficient);
        rescale(B, A);
        C = ls_update(x3, khatri_rao(B, A), F, fit.rank_deficient);
        rescale(C, A);

        const Matrix model_fit = A * khatri_rao(C, B).transpose();
        const double loss = has_missing ? observed_sse(x1, mask, model_fit)
                                        : (x1 - model_fit).squaredNorm();
        if (has_missing) {
            for (Eigen::Index c = 0; c < filled.cols(); ++c)
                for (Eigen::Index i = 0; i < filled.rows(); ++i)
                    if (!mask(i, c)) filled(i, c) = model_fit(i, c);
        }
        fit.loss_trace.push_back(loss);
        fit.loss = loss;
        fit.n_iter = it;
        if (!std::isfinite(loss)) break;
        if (loss == 0.0 || (std::isfinite(prev) && prev - loss <= opts.rel_tol * prev)) {
            fit.converged = true;
            break;
        }
        prev = loss;
    }
    fit.model = CpModel{std::move(A), std::move(B), std::move(C)};
    normalize(fit.model);
    res.filled = std::move(filled);
    return res;
}

void check_finite(const Matrix& x1, const Mask& mask) {
    for (Eigen::Index c = 0; c < x1.cols(); ++c)
        for (Eigen::Index i = 0; i < x1.rows(); ++i)
            if (mask(i, c) && !std::isfinite(x1(i, c)))
                throw std::invalid_argument("PARAFAC: non-finite observed value in row " +
                                            std::to_string(i));
}

void check_slices(const Tensor3& t, std::size_t F) {
    const auto& d = t.dims();
    std::vector<std::size_t> ci(d.I, 0), cj(d.J, 0), ck(d.K, 0);
    for (std::size_t i = 0; i < d.I; ++i)
        for (std::size_t k = 0; k < d.K; ++k)
            for (std::size_t j = 0; j < d.J; ++j)
                if (t.observed(i, j, k)) {
                    ++ci[i];
                    ++cj[j];
                    ++ck[k];
                }
    auto check = [F](const std::vector<std::size_t>& counts, const char* mode) {
        for (std::size_t s = 0; s < counts.size(); ++s) {
            if (counts[s] < F) {
                throw std::invalid_argument(std::string("PARAFAC: ") + mode + " slice " +
                                            std::to_string(s) + " has " +
                                            std::to_string(counts[s]) +
                                            " observed cells, fewer than the rank");
            }
        }
    };
    check(ci, "mode-1");
    check(cj, "mode-2");
    check(ck, "mode-3");
}

StartResult fit_starts(const Tensor3& t, const FitOptions& opts, const std::optional<Loadings>& init,
                       const Matrix& x1, const Mask& mask, const Matrix& filled) {
    if (opts.rank == 0) throw std::invalid_argument("PARAFAC: rank must be positive");
    if (opts.n_starts == 0) throw std::invalid_argument("PARAFAC: n_starts must be positive");
    if (!(opts.rel_tol > 0.0)) throw std::invalid_argument("PARAFAC: rel_tol must be positive");
    const auto& d = t.dims();
    if (init && (static_cast<std::size_t>(init->B.rows()) != d.J ||
                 static_cast<std::size_t>(init->C.rows()) != d.K ||
                 static_cast<std::size_t>(init->B.cols()) != opts.rank ||
                 static_cast<std::size_t>(init->C.cols()) != opts.rank)) {
        throw std::invalid_argument("PARAFAC: initial loadings do not match dims and rank");
    }
    const bool has_missing = !mask.all();
    std::vector<StartResult> results(opts.n_starts);
    parallel_for(opts.n_starts, [&](std::size_t s) {
        Loadings start = (s == 0 && init) ? *init
                                          : random_loadings(d.J, d.K, opts.rank, derive_seed(opts.seed, s));
        results[s] = run_start(x1, mask, has_missing, filled, d, std::move(start), opts, s);
    });
    std::size_t best = 0;
    for (std::size_t s = 1; s < results.size(); ++s) {
        if (results[s].fit.loss < results[best].fit.loss) best = s;
    }
    return std::move(results[best]);
}

}  // namespace

Loadings random_loadings(std::size_t J, std::size_t K, std::size_t rank, std::uint64_t seed) {
    Rng rng(seed);
    const auto F = static_cast<Eigen::Index>(rank);
    Loadings l{Matrix(static_cast<Eigen::Index>(J), F), Matrix(static_cast<Eigen::Index>(K), F)};
    for (Eigen::Index f = 0; f < F; ++f)
        for (Eigen::Index j = 0; j < l.B.rows(); ++j) l.B(j, f) = rng.normal();
    for (Eigen::Index f = 0; f < F; ++f)
        for (Eigen::Index k = 0; k < l.C.rows(); ++k) l.C(k, f) = rng.normal();
    l.B.colwise().normalize();
    l.C.colwise().normalize();
    return l;
}

FitResult als_complete(const Tensor3& t, const FitOptions& opts, const std::optional<Loadings>& init) {
    if (!t.complete()) throw std::invalid_argument("als_complete: tensor has missing cells");
    auto u = unfold_mode1(t);
    check_finite(u.values, u.mask);
    return fit_starts(t, opts, init, u.values, u.mask, u.values).fit;
}

IncompleteFit als_incomplete(const Tensor3& t, const FitOptions& opts, const std::optional<Loadings>& init,
                             const std::optional<Matrix>& na_init) {
    const auto& d = t.dims();
    if (t.count_observed() == 0) throw std::invalid_argument("als_incomplete: no observed cells");
    check_slices(t, opts.rank);
    auto u = unfold_mode1(t);
    check_finite(u.values, u.mask);
    Matrix filled = u.values;
    if (na_init) {
        if (na_init->rows() != u.values.rows() || na_init->cols() != u.values.cols()) {
            throw std::invalid_argument("als_incomplete: na_init must be I x JK");
        }
        for (Eigen::Index c = 0; c < filled.cols(); ++c)
            for (Eigen::Index i = 0; i < filled.rows(); ++i)
                if (!u.mask(i, c)) filled(i, c) = (*na_init)(i, c);
    } else {
        double total = 0.0;
        std::size_t total_n = 0;
        for (Eigen::Index c = 0; c < filled.cols(); ++c)
            for (Eigen::Index i = 0; i < filled.rows(); ++i)
                if (u.mask(i, c)) {
                    total += u.values(i, c);
                    ++total_n;
                }
        const double grand = total / static_cast<double>(total_n);
        for (Eigen::Index c = 0; c < filled.cols(); ++c) {
            double s = 0.0;
            std::size_t n = 0;
            for (Eigen::Index i = 0; i < filled.rows(); ++i)
                if (u.mask(i, c)) {
                    s += u.values(i, c);
                    ++n;
                }
            const double mean = n > 0 ? s / static_cast<double>(n) : grand;
            for (Eigen::Index i = 0; i < filled.rows(); ++i)
                if (!u.mask(i, c)) filled(i, c) = mean;
        }
    }
    auto best = fit_starts(t, opts, init, u.values, u.mask, filled);
    return {std::move(best.fit), fold_mode1(best.filled, d)};
}

Matrix score_rows(const Matrix& x_rows, const Matrix& b, const Matrix& c) {
    const Matrix kr = khatri_rao(c, b);
    if (x_rows.cols() != kr.rows()) throw std::invalid_argument("score_rows: rows must have length JK");
    return x_rows * pinv(kr).transpose();
}

}  // namespace macrotensor
