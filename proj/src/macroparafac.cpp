#include "macrotensor/macroparafac.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "macrotensor/linalg.hpp"
#include "macrotensor/rng.hpp"
#include "macrotensor/robust.hpp"

namespace macrotensor {

std::size_t default_h(std::size_t I) {
    auto h = static_cast<std::size_t>(std::ceil(0.75 * static_cast<double>(I + 1)));
    return std::min(h, I > 0 ? I - 1 : 0);
}

namespace {

// The `h` rows with smallest key outside `excluded`; if too few remain,
// excluded rows are appended by the same ordering. Ties by row index.
std::vector<std::size_t> smallest_rows(const std::vector<double>& key, const std::vector<char>& excluded,
                                       std::size_t h, bool& filled) {
    std::vector<std::size_t> order(key.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (excluded[a] != excluded[b]) return excluded[a] < excluded[b];
        return key[a] < key[b];
    });
    filled = h > 0 && excluded[order[h - 1]];
    order.resize(h);
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<std::size_t> complement(const std::vector<std::size_t>& set, std::size_t n) {
    std::vector<char> in(n, 0);
    for (auto i : set) in[i] = 1;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
        if (!in[i]) out.push_back(i);
    return out;
}

// x with the cells where `replace` holds taken from `source`.
Matrix overwrite(const Matrix& x, const Mask& replace, const Matrix& source) {
    return replace.select(source, x);
}

struct SubsetFit {
    Matrix B;
    Matrix C;
    Matrix A;  // rows of the subset
    double loss = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

// PARAFAC with missing-value updates on the rows `rows` of `x_rows_source`,
// where missing = unobserved or flagged, warm-started at (B, C).
SubsetFit fit_subset(const Matrix& x_source, const Mask& usable, const std::vector<std::size_t>& rows,
                     Dims dims, const Loadings& init, const FitOptions& base) {
    Matrix xs = select_rows(x_source, rows);
    Mask ms = select_rows(usable, rows);
    Dims sd{rows.size(), dims.J, dims.K};
    Tensor3 sub = fold_mode1(xs, ms, sd);
    FitOptions opts = base;
    opts.n_starts = 1;
    auto res = als_incomplete(sub, opts, init, xs);
    return {res.fit.model.B, res.fit.model.C, res.fit.model.A, res.fit.loss, res.fit.n_iter,
            res.fit.converged};
}

}  // namespace

MacroResult macroparafac(const Tensor3& t, const MacroOptions& opts) {
    const Dims d = t.dims();
    const std::size_t I = d.I;
    const std::size_t F = opts.rank;
    if (I < 4) throw std::invalid_argument("macroparafac: need at least 4 observations");
    if (F == 0) throw std::invalid_argument("macroparafac: rank must be positive");
    const std::size_t h = opts.h == 0 ? default_h(I) : opts.h;
    if (2 * h <= I + (I % 2) || h >= I) {
        throw std::invalid_argument("macroparafac: h=" + std::to_string(h) +
                                    " must satisfy ceil(I/2) < h < I for I=" + std::to_string(I));
    }
    for (std::size_t i = 0; i < I; ++i) {
        std::size_t n_obs = 0;
        for (std::size_t k = 0; k < d.K; ++k)
            for (std::size_t j = 0; j < d.J; ++j) n_obs += t.observed(i, j, k) ? 1 : 0;
        if (n_obs < F) {
            throw std::invalid_argument("macroparafac: row " + std::to_string(i) +
                                        " has fewer observed cells than the rank");
        }
    }

    MacroResult res;
    res.h = h;
    FitOptions fit_opts = opts.fit;
    fit_opts.rank = F;
    fit_opts.seed = derive_seed(opts.seed, "stage3/starts");

    const auto u = unfold_mode1(t);
    const Matrix& x = u.values;
    const Mask& observed = u.mask;
    const Mask missing = !observed;
    const auto N = static_cast<Eigen::Index>(I);

    // Stage 1: detector
    DetectorOptions det_opts = opts.detector;
    det_opts.seed = derive_seed(opts.seed, "stage1/detector");
    CellFlags det = detect_cells(x, observed, det_opts);
    const Mask& flagged = det.flagged;
    const Mask impute_all = missing || flagged;
    for (const auto& [i, c] : det.cell_outliers) {
        res.cell_set.emplace_back(i, c % d.J, c / d.J);
    }
    res.detector_rows = det.row_flags;
    std::vector<char> ddc_row(I, 0);
    for (auto i : det.row_flags) ddc_row[i] = 1;

    const Matrix x_na0 = overwrite(x, missing, det.imputed);
    const Matrix x_full0 = det.imputed;
    res.x_full_initial = fold_mode1(x_full0, d);

    std::vector<double> flag_count(I, 0.0);
    for (Eigen::Index i = 0; i < N; ++i) flag_count[static_cast<std::size_t>(i)] = flagged.row(i).count();
    bool filled = false;
    std::vector<std::size_t> cell_rows = smallest_rows(flag_count, ddc_row, h, filled);
    if (filled) res.warnings.push_back("stage 1: fewer than h rows outside the detector's row flags");
    Matrix x_cell0 = x_na0;
    for (auto i : cell_rows) x_cell0.row(static_cast<Eigen::Index>(i)) = x_full0.row(static_cast<Eigen::Index>(i));
    {
        StageSummary s{1, "detector", 0, 0.0, {}};
        s.notes.push_back("flagged cells: " + std::to_string(det.cell_outliers.size()));
        s.notes.push_back("flagged rows: " + std::to_string(det.row_flags.size()));
        s.notes.push_back("initial rowwise set: " + std::to_string(I - h));
        res.stage_log.push_back(std::move(s));
    }

    // Stage 2: projection outlyingness on the cell-imputed rows
    const Outlyingness outl = proj_outlyingness(x_cell0, h, opts.ndir, derive_seed(opts.seed, "stage2/directions"));
    std::vector<double> outl_v(outl.values.data(), outl.values.data() + outl.values.size());
    res.h0 = smallest_rows(outl_v, ddc_row, h, filled);
    if (filled) res.warnings.push_back("stage 2: fewer than h rows outside the detector's row flags");
    {
        StageSummary s{2, "outlyingness", 0, 0.0, {}};
        s.notes.push_back("valid directions: " + std::to_string(outl.valid_directions));
        s.notes.push_back("degenerate directions: " + std::to_string(outl.degenerate_directions));
        res.stage_log.push_back(std::move(s));
    }

    // Stage 3: initial loadings from the complete H0 slices
    Matrix x_cell1 = x_na0;
    for (auto i : res.h0) x_cell1.row(static_cast<Eigen::Index>(i)) = x_full0.row(static_cast<Eigen::Index>(i));
    Loadings load1;
    {
        Tensor3 sub = fold_mode1(select_rows(x_cell1, res.h0), Dims{h, d.J, d.K});
        FitResult f3 = als_complete(sub, fit_opts);
        load1 = {f3.model.B, f3.model.C};
        Matrix xh0 = select_rows(x_cell1, res.h0);
        Matrix a_h0 = score_rows(xh0, load1.B, load1.C);
        Matrix fit_h0 = a_h0 * khatri_rao(load1.C, load1.B).transpose();
        for (std::size_t r = 0; r < res.h0.size(); ++r) {
            const auto i = static_cast<Eigen::Index>(res.h0[r]);
            const auto ri = static_cast<Eigen::Index>(r);
            for (Eigen::Index c = 0; c < x.cols(); ++c)
                if (impute_all(i, c)) x_cell1(i, c) = fit_h0(ri, c);
        }
        res.stage_log.push_back({3, "initial fit", f3.n_iter, f3.loss, {"start " + std::to_string(f3.start)}});
    }

    const Mask usable = observed && !flagged;

    // Stage 4: iterative estimation on H0
    SubsetFit f4 = fit_subset(x_cell1, usable, res.h0, d, load1, fit_opts);
    Matrix a2(N, static_cast<Eigen::Index>(F));
    {
        std::vector<char> in_h0(I, 0);
        for (auto i : res.h0) in_h0[i] = 1;
        for (std::size_t r = 0; r < res.h0.size(); ++r)
            a2.row(static_cast<Eigen::Index>(res.h0[r])) = f4.A.row(static_cast<Eigen::Index>(r));
        const auto rest = complement(res.h0, I);
        if (!rest.empty()) {
            Matrix a_rest = score_rows(select_rows(x_full0, rest), f4.B, f4.C);
            for (std::size_t r = 0; r < rest.size(); ++r)
                a2.row(static_cast<Eigen::Index>(rest[r])) = a_rest.row(static_cast<Eigen::Index>(r));
        }
        res.stage_log.push_back({4, "iterative estimation", f4.iterations, f4.loss, {}});
    }
    Matrix xhat = a2 * khatri_rao(f4.C, f4.B).transpose();
    const Matrix x_na2 = overwrite(x, missing, xhat);
    const Matrix x_full2 = overwrite(x, impute_all, xhat);
    Matrix x_cell2 = x_na2;
    for (auto i : res.h0) x_cell2.row(static_cast<Eigen::Index>(i)) = x_full2.row(static_cast<Eigen::Index>(i));

    // Stage 5: reweighting
    Matrix a3 = score_rows(x_cell2, f4.B, f4.C);
    xhat = a3 * khatri_rao(f4.C, f4.B).transpose();
    std::vector<double> rd(I);
    for (Eigen::Index i = 0; i < N; ++i) rd[static_cast<std::size_t>(i)] = (x_cell2.row(i) - xhat.row(i)).norm();
    const double c_rd = rd_cutoff(rd, h);
    for (std::size_t i = 0; i < I; ++i) {
        if (rd[i] <= c_rd && !ddc_row[i]) res.h_star.push_back(i);
    }
    if (res.h_star.size() < F + 1) {
        throw std::runtime_error("macroparafac: reweighted subset has " + std::to_string(res.h_star.size()) +
                                 " rows, need at least rank + 1 = " + std::to_string(F + 1));
    }
    SubsetFit f5 = fit_subset(x_cell2, usable, res.h_star, d, {f4.B, f4.C}, fit_opts);
    res.rowwise_set = complement(res.h_star, I);
    Matrix a5(N, static_cast<Eigen::Index>(F));
    for (std::size_t r = 0; r < res.h_star.size(); ++r)
        a5.row(static_cast<Eigen::Index>(res.h_star[r])) = f5.A.row(static_cast<Eigen::Index>(r));
    if (!res.rowwise_set.empty()) {
        Matrix a_rest = score_rows(select_rows(x_full2, res.rowwise_set), f5.B, f5.C);
        for (std::size_t r = 0; r < res.rowwise_set.size(); ++r)
            a5.row(static_cast<Eigen::Index>(res.rowwise_set[r])) = a_rest.row(static_cast<Eigen::Index>(r));
    }
    const Matrix kr = khatri_rao(f5.C, f5.B);
    xhat = a5 * kr.transpose();
    Matrix x_full = overwrite(x, impute_all, xhat);
    res.loss = f5.loss;
    res.n_iter = f5.iterations;
    {
        StageSummary s{5, "reweighting", f5.iterations, f5.loss, {}};
        s.notes.push_back("c_rd: " + std::to_string(c_rd));
        s.notes.push_back("|H*|: " + std::to_string(res.h_star.size()));
        res.stage_log.push_back(std::move(s));
    }

    // Stage 6: final scores, fitted values and residuals
    Matrix a_final = score_rows(x_full, f5.B, f5.C);
    xhat = a_final * kr.transpose();
    x_full = overwrite(x_full, missing, xhat);
    const Matrix x_na = overwrite(x, missing, xhat);
    Matrix x_cell = x_na;
    for (auto i : res.h_star) x_cell.row(static_cast<Eigen::Index>(i)) = x_full.row(static_cast<Eigen::Index>(i));
    res.residuals = fold_mode1(x - xhat, observed, d);
    res.x_na = fold_mode1(x_na, d);
    res.x_cell = fold_mode1(x_cell, d);
    res.x_full = fold_mode1(x_full, d);
    res.model = CpModel{std::move(a_final), f5.B, f5.C};
    res.stage_log.push_back({6, "final scores", 0, observed_sse(x, observed, xhat), {}});
    return res;
}

}  // namespace macrotensor
