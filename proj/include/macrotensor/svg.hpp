#pragma once

#include <string>
#include <vector>

#include "macrotensor/diagnostics.hpp"

namespace macrotensor {

/// Scatter/segment plot. Each PlotPoint becomes exactly one <circle>.
std::string render_svg(const PlotSpec& plot);
/// One <rect> per grid cell plus a colour legend.
std::string render_svg(const RasterGrid& grid);

struct BoxSeries {
    std::string label;
    std::vector<double> values;
};

/// Side-by-side boxplots (quartiles, 1.5 IQR whiskers, outlying points).
/// NaN values are ignored.
std::string render_boxplot_svg(const std::string& title, const std::string& y_label,
                               const std::vector<BoxSeries>& series);

}  // namespace macrotensor
