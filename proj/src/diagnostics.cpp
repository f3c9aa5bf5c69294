#include "macrotensor/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "macrotensor/linalg.hpp"
#include "macrotensor/robust.hpp"

namespace macrotensor {

namespace {

// Relative size below which a residual scale or distance is rounding noise.
constexpr double kZeroTol = 1e-9;

}  // namespace

std::string to_string(PointColor c) {
    switch (c) {
        case PointColor::green: return "green";
        case PointColor::orange: return "orange";
        case PointColor::red: return "red";
    }
    return "green";
}

PointColor parse_color(const std::string& s) {
    if (s == "green") return PointColor::green;
    if (s == "orange") return PointColor::orange;
    if (s == "red") return PointColor::red;
    throw std::invalid_argument("unknown colour class '" + s + "'");
}

PointColor classify(double rd, double rd_imp, double c_rd) {
    if (rd <= c_rd) return PointColor::green;
    if (rd_imp <= c_rd) return PointColor::orange;
    return PointColor::red;
}

FitDiagnostics compute_diagnostics(const MacroResult& res, const Tensor3& x, double p_cell, double p_sd,
                                   std::uint64_t seed) {
    const Dims d = x.dims();
    if (!(res.x_na.dims() == d) || !(res.x_full.dims() == d) || !(res.x_cell.dims() == d) ||
        !(res.residuals.dims() == d) ||
        static_cast<std::size_t>(res.model.A.rows()) != d.I ||
        static_cast<std::size_t>(res.model.B.rows()) != d.J ||
        static_cast<std::size_t>(res.model.C.rows()) != d.K) {
        throw std::invalid_argument("compute_diagnostics: fit does not match the data dimensions");
    }
    const std::size_t F = res.model.rank();
    FitDiagnostics diag;
    diag.c_r = std::sqrt(chi2_quantile(1, p_cell));
    diag.c_sd = std::sqrt(chi2_quantile(static_cast<double>(F), p_sd));

    const Matrix xhat = reconstruct(res.model);
    const Matrix x_na = unfold_mode1(res.x_na).values;
    const Matrix x_full = unfold_mode1(res.x_full).values;
    const auto u = unfold_mode1(x);
    const auto N = static_cast<Eigen::Index>(d.I);
    const auto JK = static_cast<Eigen::Index>(d.slice());

    // Distances at the rounding level of the reconstruction count as exact fits.
    auto distance = [&](const Matrix& m, Eigen::Index i) {
        const double r = (m.row(i) - xhat.row(i)).norm();
        return r <= kZeroTol * xhat.row(i).norm() ? 0.0 : r;
    };
    diag.rd.resize(d.I);
    diag.rd_imp.resize(d.I);
    for (Eigen::Index i = 0; i < N; ++i) {
        diag.rd[static_cast<std::size_t>(i)] = distance(x_na, i);
        diag.rd_imp[static_cast<std::size_t>(i)] = distance(x_full, i);
    }
    // The cutoff is the reweighting cutoff evaluated at the final fit, i.e. on
    // distances of the cell-imputed rows.
    const std::size_t h = res.h > 0 ? res.h : default_h(d.I);
    const Matrix x_cell = unfold_mode1(res.x_cell).values;
    std::vector<double> rd_cell(d.I);
    for (Eigen::Index i = 0; i < N; ++i) rd_cell[static_cast<std::size_t>(i)] = distance(x_cell, i);
    diag.c_rd = rd_cutoff(rd_cell, h);

    FastMcdOptions mo;
    mo.seed = seed;
    const RobustCov rc = fastmcd(res.model.A, h, mo);
    const Vector sd = mahalanobis(res.model.A, rc.center, rc.scatter);
    diag.sd.assign(sd.data(), sd.data() + sd.size());

    // Residuals against the observed data, scaled per (j, k) column.
    diag.sigma_jk = Matrix::Zero(static_cast<Eigen::Index>(d.J), static_cast<Eigen::Index>(d.K));
    Matrix z = Matrix::Zero(N, JK);
    std::vector<double> col;
    for (Eigen::Index c = 0; c < JK; ++c) {
        col.clear();
        for (Eigen::Index i = 0; i < N; ++i)
            if (u.mask(i, c)) col.push_back(u.values(i, c) - xhat(i, c));
        double s = col.size() >= 2 ? mscale(col) : 0.0;
        if (s <= kZeroTol * xhat.col(c).cwiseAbs().maxCoeff()) s = 0.0;
        diag.sigma_jk(c % static_cast<Eigen::Index>(d.J), c / static_cast<Eigen::Index>(d.J)) = s;
        for (Eigen::Index i = 0; i < N; ++i) {
            if (!u.mask(i, c)) continue;
            z(i, c) = s > 0.0 ? (u.values(i, c) - xhat(i, c)) / s : 0.0;
        }
    }
    diag.std_residuals = fold_mode1(z, u.mask, d);

    diag.poc.resize(d.I);
    diag.color.resize(d.I);
    for (Eigen::Index i = 0; i < N; ++i) {
        std::size_t n_out = 0;
        for (Eigen::Index c = 0; c < JK; ++c)
            if (u.mask(i, c) && std::abs(z(i, c)) > diag.c_r) ++n_out;
        const auto ii = static_cast<std::size_t>(i);
        diag.poc[ii] = static_cast<double>(n_out) / static_cast<double>(d.slice());
        diag.color[ii] = classify(diag.rd[ii], diag.rd_imp[ii], diag.c_rd);
    }
    return diag;
}

// ---- residual maps --------------------------------------------------------

std::string to_hex(Rgb c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

namespace {

Rgb lerp(Rgb a, Rgb b, double t) {
    auto mix = [t](std::uint8_t u, std::uint8_t v) {
        return static_cast<std::uint8_t>(std::lround(u + (static_cast<double>(v) - u) * t));
    };
    return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

}  // namespace

Rgb residual_color(double v, double c_r) {
    if (std::isnan(v)) return kWhite;
    if (std::abs(v) <= c_r) return kYellow;
    const double t = std::clamp((std::abs(v) - c_r) / (3.0 * c_r), 0.0, 1.0);
    return v > 0 ? lerp(kLightOrange, kRed, t) : lerp(kLightPurple, kDarkBlue, t);
}

RasterGrid residual_map(const FitDiagnostics& diag, const std::vector<std::size_t>& rows, std::size_t block) {
    const Dims d = diag.std_residuals.dims();
    if (block == 0) throw std::invalid_argument("residual_map: block size must be at least 1");
    std::vector<std::size_t> sel = rows;
    if (sel.empty()) {
        sel.resize(d.I);
        std::iota(sel.begin(), sel.end(), std::size_t{0});
    }
    if (sel.empty()) throw std::invalid_argument("residual_map: empty selection");
    for (auto i : sel)
        if (i >= d.I) throw std::invalid_argument("residual_map: row " + std::to_string(i + 1) + " out of range");
    RasterGrid g;
    g.kind = "residual_map";
    g.rows = sel.size();
    g.cols = (d.slice() + block - 1) / block;
    g.block = block;
    g.c_r = diag.c_r;
    g.row_index = sel;
    for (auto i : sel) {
        for (std::size_t b = 0; b < g.cols; ++b) {
            double s = 0.0;
            std::size_t n = 0;
            for (std::size_t c = b * block; c < std::min(d.slice(), (b + 1) * block); ++c) {
                const std::size_t off = i * d.slice() + c;
                if (!diag.std_residuals.observed_at(off)) continue;
                s += diag.std_residuals.value_at(off);
                ++n;
            }
            const double v = n > 0 ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
            g.values.push_back(v);
            g.colors.push_back(residual_color(v, diag.c_r));
        }
    }
    return g;
}

RasterGrid sample_residual_map(const FitDiagnostics& diag, std::size_t i) {
    const Dims d = diag.std_residuals.dims();
    if (i >= d.I) throw std::invalid_argument("sample_residual_map: sample " + std::to_string(i + 1) + " out of range");
    RasterGrid g;
    g.kind = "sample_residual_map";
    g.rows = d.J;
    g.cols = d.K;
    g.c_r = diag.c_r;
    g.row_index.assign(d.J, i);
    for (std::size_t j = 0; j < d.J; ++j) {
        for (std::size_t k = 0; k < d.K; ++k) {
            const double v = diag.std_residuals.observed(i, j, k) ? diag.std_residuals(i, j, k)
                                                                   : std::numeric_limits<double>::quiet_NaN();
            g.values.push_back(v);
            g.colors.push_back(residual_color(v, diag.c_r));
        }
    }
    return g;
}

// ---- plots ----------------------------------------------------------------

double poc_marker_area(double poc) { return 12.0 + 400.0 * std::clamp(poc, 0.0, 1.0); }

PlotSpec outlier_map(const FitDiagnostics& diag) {
    PlotSpec p;
    p.kind = "outlier_map";
    p.title = "Enhanced outlier map";
    p.x_label = "Score distance";
    p.y_label = "Residual distance";
    for (std::size_t i = 0; i < diag.rd.size(); ++i) {
        p.points.push_back({diag.sd[i], diag.rd[i], poc_marker_area(diag.poc[i]), diag.color[i], true, i});
    }
    p.cutoffs = {{"x", diag.c_sd}, {"y", diag.c_rd}};
    return p;
}

PlotSpec rd_reduction_plot(const FitDiagnostics& diag) {
    PlotSpec p;
    p.kind = "rd_reduction";
    p.title = "Residual distance before and after imputation";
    p.x_label = "Sample rank";
    p.y_label = "Residual distance";
    p.log_y = true;
    const std::size_t n = diag.rd.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return diag.rd[a] < diag.rd[b]; });
    const double max_rd = n > 0 ? *std::max_element(diag.rd.begin(), diag.rd.end()) : 0.0;
    const double floor = max_rd > 0.0 ? 1e-12 * max_rd : 1e-12;
    auto cls = [&](double v) { return v > diag.c_rd ? PointColor::red : PointColor::green; };
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t i = order[r];
        const double x = static_cast<double>(r + 1);
        const double y0 = std::max(diag.rd[i], floor);
        const double y1 = std::max(diag.rd_imp[i], floor);
        p.segments.push_back({x, y0, x, y1, diag.color[i]});
        p.points.push_back({x, y0, poc_marker_area(0.0), cls(diag.rd[i]), true, i});
        p.points.push_back({x, y1, poc_marker_area(0.0), cls(diag.rd_imp[i]), false, i});
    }
    p.cutoffs = {{"y", diag.c_rd}};
    return p;
}

// ---- serialisation --------------------------------------------------------

void to_json(nlohmann::json& j, const Rgb& c) { j = to_hex(c); }

void from_json(const nlohmann::json& j, Rgb& c) {
    const std::string s = j.get<std::string>();
    unsigned r = 0, g = 0, b = 0;
    if (s.size() != 7 || std::sscanf(s.c_str(), "#%02x%02x%02x", &r, &g, &b) != 3) {
        throw std::invalid_argument("bad colour '" + s + "'");
    }
    c = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
}

void to_json(nlohmann::json& j, const RasterGrid& g) {
    nlohmann::json values = nlohmann::json::array();
    for (double v : g.values) values.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    std::vector<std::size_t> rows1;
    for (auto i : g.row_index) rows1.push_back(i + 1);
    j = {{"kind", g.kind},
         {"grid", {{"rows", g.rows}, {"cols", g.cols}, {"values", values}, {"colors", g.colors}, {"row_index", rows1}}},
         {"block", g.block},
         {"cutoffs", {{"c_r", g.c_r}}},
         {"palette",
          {{"regular", kYellow}, {"missing", kWhite}, {"positive", {kLightOrange, kRed}}, {"negative", {kLightPurple, kDarkBlue}}}}};
}

void from_json(const nlohmann::json& j, RasterGrid& g) {
    g.kind = j.at("kind").get<std::string>();
    const auto& grid = j.at("grid");
    g.rows = grid.at("rows").get<std::size_t>();
    g.cols = grid.at("cols").get<std::size_t>();
    g.values.clear();
    for (const auto& v : grid.at("values"))
        g.values.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    g.colors = grid.at("colors").get<std::vector<Rgb>>();
    g.row_index.clear();
    for (auto i : grid.at("row_index").get<std::vector<std::size_t>>()) {
        if (i == 0) throw std::invalid_argument("row_index entries are 1-based");
        g.row_index.push_back(i - 1);
    }
    g.block = j.value("block", std::size_t{1});
    g.c_r = j.at("cutoffs").at("c_r").get<double>();
    if (g.values.size() != g.rows * g.cols || g.colors.size() != g.values.size()) {
        throw std::invalid_argument("raster grid: values/colors do not match rows x cols");
    }
}

void to_json(nlohmann::json& j, const PlotSpec& p) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& q : p.points) {
        pts.push_back({{"x", q.x}, {"y", q.y}, {"size", q.size}, {"color", to_string(q.color)},
                       {"filled", q.filled}, {"index", q.index + 1}});
    }
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : p.segments) {
        segs.push_back({{"x1", s.x1}, {"y1", s.y1}, {"x2", s.x2}, {"y2", s.y2}, {"color", to_string(s.color)}});
    }
    nlohmann::json cuts = nlohmann::json::array();
    for (const auto& c : p.cutoffs) cuts.push_back({{"axis", c.axis}, {"value", c.value}});
    j = {{"kind", p.kind},     {"title", p.title},   {"x_label", p.x_label}, {"y_label", p.y_label},
         {"log_y", p.log_y},   {"points", pts},      {"segments", segs},     {"cutoffs", cuts},
         {"palette", {{"green", "#1a9850"}, {"orange", "#fd8d3c"}, {"red", "#d7301f"}}}};
}

void from_json(const nlohmann::json& j, PlotSpec& p) {
    p.kind = j.at("kind").get<std::string>();
    p.title = j.value("title", std::string{});
    p.x_label = j.value("x_label", std::string{});
    p.y_label = j.value("y_label", std::string{});
    p.log_y = j.value("log_y", false);
    p.points.clear();
    for (const auto& q : j.at("points")) {
        const auto idx = q.at("index").get<std::size_t>();
        if (idx == 0) throw std::invalid_argument("point index entries are 1-based");
        p.points.push_back({q.at("x").get<double>(), q.at("y").get<double>(), q.at("size").get<double>(),
                            parse_color(q.at("color").get<std::string>()), q.value("filled", true), idx - 1});
    }
    p.segments.clear();
    for (const auto& s : j.value("segments", nlohmann::json::array())) {
        p.segments.push_back({s.at("x1").get<double>(), s.at("y1").get<double>(), s.at("x2").get<double>(),
                              s.at("y2").get<double>(), parse_color(s.at("color").get<std::string>())});
    }
    p.cutoffs.clear();
    for (const auto& c : j.value("cutoffs", nlohmann::json::array())) {
        p.cutoffs.push_back({c.at("axis").get<std::string>(), c.at("value").get<double>()});
    }
}

namespace {
std::string num(double v) {
    if (std::isnan(v)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace

void write_diagnostics_csv(std::ostream& os, const FitDiagnostics& diag) {
    os << "i,rd,rd_imp,sd,poc,color\n";
    for (std::size_t i = 0; i < diag.rd.size(); ++i) {
        os << i + 1 << ',' << num(diag.rd[i]) << ',' << num(diag.rd_imp[i]) << ',' << num(diag.sd[i]) << ','
           << num(diag.poc[i]) << ',' << to_string(diag.color[i]) << '\n';
    }
}

void write_points_csv(std::ostream& os, const PlotSpec& p) {
    os << "index,x,y,size,color,filled\n";
    for (const auto& q : p.points) {
        os << q.index + 1 << ',' << num(q.x) << ',' << num(q.y) << ',' << num(q.size) << ',' << to_string(q.color)
           << ',' << (q.filled ? 1 : 0) << '\n';
    }
}

void write_grid_csv(std::ostream& os, const RasterGrid& g) {
    os << "row,col,value,color\n";
    for (std::size_t r = 0; r < g.rows; ++r) {
        for (std::size_t c = 0; c < g.cols; ++c) {
            const std::size_t n = r * g.cols + c;
            os << g.row_index[r] + 1 << ',' << c + 1 << ',' << num(g.values[n]) << ',' << to_hex(g.colors[n]) << '\n';
        }
    }
}

}  // namespace macrotensor
