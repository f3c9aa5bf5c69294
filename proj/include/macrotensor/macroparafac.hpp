#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "macrotensor/detect.hpp"
#include "macrotensor/parafac.hpp"
#include "macrotensor/tensor.hpp"

namespace macrotensor {

struct MacroOptions {
    std::size_t rank = 2;
    /// Subset size; 0 selects ceil(0.75 (I + 1)).
    std::size_t h = 0;
    std::size_t ndir = 250;
    /// Stage-3 fit settings (multi-start). rank is taken from `rank`.
    FitOptions fit{};
    DetectorOptions detector{};
    std::uint64_t seed = 0;
};

/// ceil(0.75 (I + 1)), capped to I - 1.
std::size_t default_h(std::size_t I);

struct StageSummary {
    int stage = 0;
    std::string name;
    std::size_t iterations = 0;
    double loss = 0.0;
    std::vector<std::string> notes;
};

using Cell = std::tuple<std::size_t, std::size_t, std::size_t>;

struct MacroResult {
    /// Final scores and normalised loadings.
    CpModel model;
    /// Missing cells imputed by the final fit.
    Tensor3 x_na;
    /// Missing cells imputed, and flagged cells imputed outside rowwise_set.
    Tensor3 x_cell;
    /// Missing and all flagged cells imputed.
    Tensor3 x_full;
    /// Detector imputation of missing and flagged cells, before any PARAFAC fit.
    Tensor3 x_full_initial;
    /// X - Xhat, missing where X is missing.
    Tensor3 residuals;
    /// Rows excluded from the final loading estimate, ascending.
    std::vector<std::size_t> rowwise_set;
    /// Flagged cells from the detector; fixed after stage 1.
    std::vector<Cell> cell_set;
    /// Final subset H*, ascending.
    std::vector<std::size_t> h_star;
    /// Initial subset H0, ascending.
    std::vector<std::size_t> h0;
    /// Rows flagged by the detector.
    std::vector<std::size_t> detector_rows;
    std::size_t h = 0;
    /// Observed-cell loss of the final inner fit on H*.
    double loss = 0.0;
    std::size_t n_iter = 0;
    std::vector<StageSummary> stage_log;
    std::vector<std::string> warnings;
};

/// Robust PARAFAC for incomplete arrays with rowwise and cellwise outliers.
/// Throws std::invalid_argument on bad dimensions or h, and
/// std::runtime_error when the reweighted subset is too small to fit.
MacroResult macroparafac(const Tensor3& t, const MacroOptions& opts);

}  // namespace macrotensor
