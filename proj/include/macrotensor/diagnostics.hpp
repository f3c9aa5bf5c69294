#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "macrotensor/macroparafac.hpp"
#include "macrotensor/tensor.hpp"

namespace macrotensor {

enum class PointColor { green, orange, red };
std::string to_string(PointColor c);
PointColor parse_color(const std::string& s);

struct FitDiagnostics {
    /// ||X_na,i - Xhat_i||
    std::vector<double> rd;
    /// ||X_full,i - Xhat_i||
    std::vector<double> rd_imp;
    /// Robust Mahalanobis distance of the scores.
    std::vector<double> sd;
    /// Fraction of the JK cells (missing ones included) with |standardised residual| > c_r.
    std::vector<double> poc;
    std::vector<PointColor> color;
    /// Residual-distance cutoff evaluated on the cell-imputed distances ||X_cell,i - Xhat_i||.
    double c_rd = 0.0;
    double c_sd = 0.0;
    double c_r = 0.0;
    /// J x K residual M-scales.
    Matrix sigma_jk;
    /// r_ijk / sigma_jk, missing where X is missing; 0 where sigma_jk = 0.
    Tensor3 std_residuals;
};

/// Green iff rd <= c_rd, orange iff rd > c_rd and rd_imp <= c_rd, red otherwise.
PointColor classify(double rd, double rd_imp, double c_rd);

/// Residual and score distances, POC, cutoffs and colours for a MacroPARAFAC
/// fit of `x`. Distances below 1e-9 of the fitted row norm and residual
/// scales below 1e-9 of the fitted column magnitude are treated as 0. Throws std::invalid_argument when res does not match x and
/// std::runtime_error for singular score scatter.
FitDiagnostics compute_diagnostics(const MacroResult& res, const Tensor3& x, double p_cell = 0.998,
                                   double p_sd = 0.998, std::uint64_t seed = 0);

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};
std::string to_hex(Rgb c);

inline constexpr Rgb kYellow{255, 255, 0};
inline constexpr Rgb kWhite{255, 255, 255};
inline constexpr Rgb kLightOrange{255, 200, 120};
inline constexpr Rgb kRed{255, 0, 0};
inline constexpr Rgb kLightPurple{210, 170, 235};
inline constexpr Rgb kDarkBlue{0, 0, 139};

/// Residual-map colour of a standardised residual: white for NaN, yellow
/// when |v| <= c_r, light orange to red over (c_r, 4 c_r], light purple to
/// dark blue over [-4 c_r, -c_r), saturating beyond.
Rgb residual_color(double v, double c_r);

struct RasterGrid {
    std::string kind;
    std::size_t rows = 0;
    std::size_t cols = 0;
    /// Row-major cell values (mean standardised residual, NaN when all missing).
    std::vector<double> values;
    std::vector<Rgb> colors;
    /// Source observation of each grid row (single-sample maps: the sample).
    std::vector<std::size_t> row_index;
    std::size_t block = 1;
    double c_r = 0.0;
};

/// Mode-1 matricised residual map over `rows` (empty = all), averaging
/// `block` consecutive columns of the unfolding. Throws std::invalid_argument
/// on an out-of-range row, an empty selection or block = 0.
RasterGrid residual_map(const FitDiagnostics& diag, const std::vector<std::size_t>& rows = {},
                        std::size_t block = 1);
/// J x K residual map of one sample.
RasterGrid sample_residual_map(const FitDiagnostics& diag, std::size_t i);

struct PlotPoint {
    double x = 0.0;
    double y = 0.0;
    /// Marker area in px^2.
    double size = 0.0;
    PointColor color = PointColor::green;
    bool filled = true;
    std::size_t index = 0;
};

struct PlotSegment {
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
    PointColor color = PointColor::green;
};

struct CutoffLine {
    /// "x" for a vertical line at value, "y" for a horizontal one.
    std::string axis;
    double value = 0.0;
};

struct PlotSpec {
    std::string kind;
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
    std::vector<PlotPoint> points;
    std::vector<PlotSegment> segments;
    std::vector<CutoffLine> cutoffs;
};

/// Marker area for a POC value: minimum plus a term proportional to poc.
double poc_marker_area(double poc);

/// SD (x) versus RD (y), marker area from POC, colour class, dashed cutoffs.
PlotSpec outlier_map(const FitDiagnostics& diag);
/// Samples ranked by ascending RD (ties by index): filled marker at RD,
/// open marker at imputed RD, joined by a segment, log y axis.
PlotSpec rd_reduction_plot(const FitDiagnostics& diag);

void to_json(nlohmann::json& j, const Rgb& c);
void from_json(const nlohmann::json& j, Rgb& c);
void to_json(nlohmann::json& j, const RasterGrid& g);
void from_json(const nlohmann::json& j, RasterGrid& g);
void to_json(nlohmann::json& j, const PlotSpec& p);
void from_json(const nlohmann::json& j, PlotSpec& p);

/// Columns: i (1-based), rd, rd_imp, sd, poc, color.
void write_diagnostics_csv(std::ostream& os, const FitDiagnostics& diag);
/// Columns: index (1-based), x, y, size, color, filled.
void write_points_csv(std::ostream& os, const PlotSpec& p);
/// Columns: row (1-based source row), col, value, color.
void write_grid_csv(std::ostream& os, const RasterGrid& g);

}  // namespace macrotensor
