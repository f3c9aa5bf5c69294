#include "macrotensor/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "macrotensor/robust.hpp"

namespace macrotensor {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string color_hex(PointColor c) {
    switch (c) {
        case PointColor::green: return "#1a9850";
        case PointColor::orange: return "#fd8d3c";
        case PointColor::red: return "#d7301f";
    }
    return "#000000";
}

// Roughly five round tick positions covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi) {
    if (!(hi > lo)) return {lo};
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    std::vector<double> t;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) t.push_back(v);
    return t;
}

struct Frame {
    double width = 640, height = 480;
    double left = 70, right = 20, top = 40, bottom = 55;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool log_y = false;

    double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
    double py(double y) const {
        const double v = log_y ? std::log10(y) : y;
        return height - bottom - (v - y0) / (y1 - y0) * (height - top - bottom);
    }
};

void pad(double& lo, double& hi) {
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
        return;
    }
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
}

void axes(std::ostringstream& os, const Frame& f, const std::string& title, const std::string& xl,
          const std::string& yl, bool x_ticks = true) {
    const double bx = f.height - f.bottom;
    os << "<rect x=\"" << fmt(f.left) << "\" y=\"" << fmt(f.top) << "\" width=\"" << fmt(f.width - f.left - f.right)
       << "\" height=\"" << fmt(f.height - f.top - f.bottom) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    if (x_ticks) {
        for (double t : nice_ticks(f.x0, f.x1)) {
            os << "<line x1=\"" << fmt(f.px(t)) << "\" y1=\"" << fmt(bx) << "\" x2=\"" << fmt(f.px(t)) << "\" y2=\""
               << fmt(bx + 5) << "\" stroke=\"#444\"/><text x=\"" << fmt(f.px(t)) << "\" y=\"" << fmt(bx + 18)
               << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
        }
    }
    for (double t : nice_ticks(f.y0, f.y1)) {
        const double y = f.height - f.bottom - (t - f.y0) / (f.y1 - f.y0) * (f.height - f.top - f.bottom);
        const std::string label = f.log_y ? fmt(std::pow(10.0, t)) : fmt(t);
        os << "<line x1=\"" << fmt(f.left - 5) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(f.left) << "\" y2=\""
           << fmt(y) << "\" stroke=\"#444\"/><text x=\"" << fmt(f.left - 8) << "\" y=\"" << fmt(y + 4)
           << "\" font-size=\"11\" text-anchor=\"end\">" << label << "</text>\n";
    }
    os << "<text x=\"" << fmt(f.width / 2) << "\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">" << escape(title)
       << "</text>\n";
    os << "<text x=\"" << fmt((f.left + f.width - f.right) / 2) << "\" y=\"" << fmt(f.height - 12)
       << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(xl) << "</text>\n";
    os << "<text x=\"16\" y=\"" << fmt((f.top + f.height - f.bottom) / 2)
       << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << fmt((f.top + f.height - f.bottom) / 2) << ")\">" << escape(yl) << "</text>\n";
}

std::string header(double w, double h) {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w)
       << "\" height=\"" << fmt(h) << "\" viewBox=\"0 0 " << fmt(w) << ' ' << fmt(h) << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return os.str();
}

}  // namespace

std::string render_svg(const PlotSpec& plot) {
    Frame f;
    f.log_y = plot.log_y;
    auto ty = [&](double y) { return plot.log_y ? std::log10(std::max(y, std::numeric_limits<double>::min())) : y; };
    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
    auto take = [&](double x, double y) {
        xlo = std::min(xlo, x);
        xhi = std::max(xhi, x);
        ylo = std::min(ylo, ty(y));
        yhi = std::max(yhi, ty(y));
    };
    for (const auto& p : plot.points) take(p.x, p.y);
    for (const auto& c : plot.cutoffs) {
        if (c.axis == "x") {
            xlo = std::min(xlo, c.value);
            xhi = std::max(xhi, c.value);
        } else if (!plot.log_y || c.value > 0) {
            ylo = std::min(ylo, ty(c.value));
            yhi = std::max(yhi, ty(c.value));
        }
    }
    if (!std::isfinite(xlo)) xlo = 0, xhi = 1;
    if (!std::isfinite(ylo)) ylo = 0, yhi = 1;
    if (!plot.log_y) {
        xlo = std::min(xlo, 0.0);
        ylo = std::min(ylo, 0.0);
    }
    pad(xlo, xhi);
    pad(ylo, yhi);
    f.x0 = xlo, f.x1 = xhi, f.y0 = ylo, f.y1 = yhi;

    std::ostringstream os;
    os << header(f.width, f.height);
    axes(os, f, plot.title, plot.x_label, plot.y_label);
    for (const auto& c : plot.cutoffs) {
        if (c.axis == "x") {
            os << "<line class=\"cutoff\" x1=\"" << fmt(f.px(c.value)) << "\" y1=\"" << fmt(f.top) << "\" x2=\""
               << fmt(f.px(c.value)) << "\" y2=\"" << fmt(f.height - f.bottom)
               << "\" stroke=\"#555\" stroke-dasharray=\"6 4\"/>\n";
        } else if (!plot.log_y || c.value > 0) {
            os << "<line class=\"cutoff\" x1=\"" << fmt(f.left) << "\" y1=\"" << fmt(f.py(c.value)) << "\" x2=\""
               << fmt(f.width - f.right) << "\" y2=\"" << fmt(f.py(c.value))
               << "\" stroke=\"#555\" stroke-dasharray=\"6 4\"/>\n";
        }
    }
    for (const auto& s : plot.segments) {
        os << "<line x1=\"" << fmt(f.px(s.x1)) << "\" y1=\"" << fmt(f.py(s.y1)) << "\" x2=\"" << fmt(f.px(s.x2))
           << "\" y2=\"" << fmt(f.py(s.y2)) << "\" stroke=\"" << color_hex(s.color) << "\" stroke-width=\"1.5\"/>\n";
    }
    for (const auto& p : plot.points) {
        const double r = std::sqrt(p.size / M_PI);
        const std::string col = color_hex(p.color);
        os << "<circle cx=\"" << fmt(f.px(p.x)) << "\" cy=\"" << fmt(f.py(p.y)) << "\" r=\"" << fmt(r) << "\" fill=\""
           << (p.filled ? col : std::string("white")) << "\" fill-opacity=\"" << (p.filled ? "0.75" : "1")
           << "\" stroke=\"" << col << "\"><title>" << p.index + 1 << "</title></circle>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string render_svg(const RasterGrid& grid) {
    const double cell_w = std::clamp(900.0 / static_cast<double>(std::max<std::size_t>(grid.cols, 1)), 0.5, 20.0);
    const double cell_h = std::clamp(600.0 / static_cast<double>(std::max<std::size_t>(grid.rows, 1)), 2.0, 20.0);
    const double left = 50, top = 40;
    const double w = left + cell_w * static_cast<double>(grid.cols) + 140;
    const double h = top + cell_h * static_cast<double>(grid.rows) + 40;
    std::ostringstream os;
    os << header(w, h);
    os << "<text x=\"" << fmt(left) << "\" y=\"24\" font-size=\"14\">"
       << (grid.kind == "sample_residual_map" ? "Residual map, sample " + std::to_string(grid.row_index.empty() ? 0 : grid.row_index[0] + 1)
                                               : std::string("Residual map"))
       << "</text>\n<g shape-rendering=\"crispEdges\">\n";
    for (std::size_t r = 0; r < grid.rows; ++r) {
        for (std::size_t c = 0; c < grid.cols; ++c) {
            os << "<rect x=\"" << fmt(left + cell_w * static_cast<double>(c)) << "\" y=\""
               << fmt(top + cell_h * static_cast<double>(r)) << "\" width=\"" << fmt(cell_w) << "\" height=\""
               << fmt(cell_h) << "\" fill=\"" << to_hex(grid.colors[r * grid.cols + c]) << "\"/>\n";
        }
        if (grid.kind != "sample_residual_map" && (grid.rows <= 60 || r % 5 == 0)) {
            os << "<text x=\"" << fmt(left - 4) << "\" y=\"" << fmt(top + cell_h * (static_cast<double>(r) + 0.8))
               << "\" font-size=\"" << fmt(std::min(cell_h, 10.0)) << "\" text-anchor=\"end\">" << grid.row_index[r] + 1
               << "</text>\n";
        }
    }
    os << "</g>\n";
    const double lx = left + cell_w * static_cast<double>(grid.cols) + 20;
    const std::pair<const char*, Rgb> legend[] = {{"regular", kYellow},      {"> c_r", kLightOrange},
                                                  {">= 4 c_r", kRed},        {"< -c_r", kLightPurple},
                                                  {"<= -4 c_r", kDarkBlue},  {"missing", kWhite}};
    double ly = top;
    for (const auto& [label, col] : legend) {
        os << "<rect x=\"" << fmt(lx) << "\" y=\"" << fmt(ly) << "\" width=\"12\" height=\"12\" fill=\"" << to_hex(col)
           << "\" stroke=\"#888\"/><text x=\"" << fmt(lx + 18) << "\" y=\"" << fmt(ly + 10) << "\" font-size=\"11\">"
           << escape(label) << "</text>\n";
        ly += 18;
    }
    os << "</svg>\n";
    return os.str();
}

std::string render_boxplot_svg(const std::string& title, const std::string& y_label,
                               const std::vector<BoxSeries>& series) {
    Frame f;
    f.width = std::max(320.0, 110.0 * static_cast<double>(series.size()) + 100.0);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::vector<std::vector<double>> clean;
    for (const auto& s : series) {
        std::vector<double> v;
        for (double x : s.values)
            if (!std::isnan(x)) v.push_back(x);
        for (double x : v) lo = std::min(lo, x), hi = std::max(hi, x);
        clean.push_back(std::move(v));
    }
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    pad(lo, hi);
    f.x0 = 0;
    f.x1 = static_cast<double>(series.size());
    f.y0 = lo;
    f.y1 = hi;
    std::ostringstream os;
    os << header(f.width, f.height);
    axes(os, f, title, "", y_label, false);
    for (std::size_t s = 0; s < series.size(); ++s) {
        const double cx = f.px(static_cast<double>(s) + 0.5);
        const double half = 0.3 * (f.px(1.0) - f.px(0.0));
        os << "<text x=\"" << fmt(cx) << "\" y=\"" << fmt(f.height - f.bottom + 18)
           << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(series[s].label) << "</text>\n";
        const auto& v = clean[s];
        if (v.empty()) continue;
        const double q1 = quantile(v, 0.25), q2 = quantile(v, 0.5), q3 = quantile(v, 0.75);
        const double iqr = q3 - q1;
        double wlo = q1, whi = q3;
        for (double x : v) {
            if (x >= q1 - 1.5 * iqr) wlo = std::min(wlo, x);
            if (x <= q3 + 1.5 * iqr) whi = std::max(whi, x);
        }
        os << "<g class=\"box\">\n";
        os << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(f.py(wlo)) << "\" x2=\"" << fmt(cx) << "\" y2=\""
           << fmt(f.py(whi)) << "\" stroke=\"#333\"/>\n";
        os << "<rect x=\"" << fmt(cx - half) << "\" y=\"" << fmt(f.py(q3)) << "\" width=\"" << fmt(2 * half)
           << "\" height=\"" << fmt(std::max(f.py(q1) - f.py(q3), 0.5)) << "\" fill=\"#9ecae1\" stroke=\"#333\"/>\n";
        os << "<line x1=\"" << fmt(cx - half) << "\" y1=\"" << fmt(f.py(q2)) << "\" x2=\"" << fmt(cx + half)
           << "\" y2=\"" << fmt(f.py(q2)) << "\" stroke=\"#08306b\" stroke-width=\"2\"/>\n";
        for (double x : v) {
            if (x < wlo || x > whi) {
                os << "<circle cx=\"" << fmt(cx) << "\" cy=\"" << fmt(f.py(x)) << "\" r=\"2.5\" fill=\"none\" stroke=\"#333\"/>\n";
            }
        }
        os << "</g>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace macrotensor
