#include "macrotensor/simulation.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "macrotensor/linalg.hpp"
#include "macrotensor/parallel.hpp"
#include "macrotensor/robust.hpp"
#include "macrotensor/rng.hpp"

namespace macrotensor {

namespace {

struct Mixture {
    std::array<double, 3> mu;
    std::array<double, 3> var;
};

constexpr Mixture kB1{{-8, 0, 8}, {10, 12, 10}};
constexpr Mixture kB2{{25, 20, 15}, {4, 4, 4}};
constexpr Mixture kC1{{-8, 0, 8}, {10, 10, 10}};
constexpr Mixture kC2{{-15, -20, -25}, {6, 6, 6}};

double density(const Mixture& m, double t) {
    constexpr double inv_sqrt_2pi = 0.39894228040143267794;
    double s = 0.0;
    for (int l = 0; l < 3; ++l) {
        const double z = (t - m.mu[l]) / std::sqrt(m.var[l]);
        s += inv_sqrt_2pi / std::sqrt(m.var[l]) * std::exp(-0.5 * z * z) / 3.0;
    }
    return s;
}

// Both components on one grid spanning every centre +- 4 of the widest sd.
Matrix mixture_grid(const Mixture& a, const Mixture& b, std::size_t n) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double sd = 0.0;
    for (const Mixture* m : {&a, &b}) {
        for (int l = 0; l < 3; ++l) {
            lo = std::min(lo, m->mu[l]);
            hi = std::max(hi, m->mu[l]);
            sd = std::max(sd, std::sqrt(m->var[l]));
        }
    }
    lo -= 4.0 * sd;
    hi += 4.0 * sd;
    Matrix out(static_cast<Eigen::Index>(n), 2);
    for (std::size_t p = 0; p < n; ++p) {
        const double t = n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(p) / static_cast<double>(n - 1);
        out(static_cast<Eigen::Index>(p), 0) = density(a, t);
        out(static_cast<Eigen::Index>(p), 1) = density(b, t);
    }
    return out;
}

std::size_t rounded(double frac, std::size_t n) {
    return static_cast<std::size_t>(std::llround(std::max(0.0, frac * static_cast<double>(n))));
}

double median_of(std::vector<double> v) {
    std::erase_if(v, [](double x) { return std::isnan(x); });
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    return median(std::move(v));
}

double quantile_of(std::vector<double> v, double p) {
    std::erase_if(v, [](double x) { return std::isnan(x); });
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    return quantile(std::move(v), p);
}

}  // namespace

Matrix mixture_loadings_b(std::size_t J) { return mixture_grid(kB1, kB2, J); }
Matrix mixture_loadings_c(std::size_t K) { return mixture_grid(kC1, kC2, K); }

void validate(const ContaminationSpec& s) {
    for (double f : {s.rho, s.eps_r, s.eps_c, s.nu}) {
        if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("contamination fractions must lie in [0, 1]");
    }
    if (s.rho + s.eps_r > 1.0 + 1e-12) throw std::invalid_argument("rho + eps_r must not exceed 1");
    if (!(s.gamma >= 0.0)) throw std::invalid_argument("gamma must be nonnegative");
}

GeneratedData generate(const ContaminationSpec& spec, const GeneratorOptions& opts) {
    validate(spec);
    const Dims d = opts.dims;
    if (d.I < 1 || d.J < 1 || d.K < 1) throw std::invalid_argument("generate: dims must be positive");
    if (opts.rank < 1 || opts.rank > 2) throw std::invalid_argument("generate: rank must be 1 or 2");
    if (!(opts.noise >= 0.0 && opts.noise < 1.0)) throw std::invalid_argument("generate: noise must lie in [0, 1)");
    const auto F = static_cast<Eigen::Index>(opts.rank);
    const auto I = static_cast<Eigen::Index>(d.I);
    const auto JK = static_cast<Eigen::Index>(d.slice());

    GeneratedData g;
    Rng rng(derive_seed(spec.seed, "generate"));
    g.truth.B = mixture_loadings_b(d.J).leftCols(F);
    g.truth.C = mixture_loadings_c(d.K).leftCols(F);
    g.truth.A = Matrix(I, F);
    const double a_sd[2] = {1.0, std::sqrt(2.0)};
    for (Eigen::Index i = 0; i < I; ++i)
        for (Eigen::Index f = 0; f < F; ++f) g.truth.A(i, f) = rng.normal(10.0, a_sd[f]);
    const Matrix pure = 100.0 * g.truth.A * khatri_rao(g.truth.C, g.truth.B).transpose();

    Matrix e(I, JK);
    for (Eigen::Index i = 0; i < I; ++i)
        for (Eigen::Index c = 0; c < JK; ++c) e(i, c) = rng.normal(0.0, std::sqrt(10.0));
    const double en = e.norm();
    if (en > 0.0) e *= (opts.noise / (1.0 - opts.noise)) * pure.norm() / en;
    Matrix x = pure + e;
    g.x_clean = fold_mode1(x, d);

    // Row roles
    const std::size_t n_clean = rounded(spec.rho, d.I);
    const std::size_t n_row = rounded(spec.eps_r, d.I);
    if (n_clean + n_row > d.I) throw std::invalid_argument("generate: rho and eps_r select more rows than exist");
    const auto perm = rng.permutation(d.I);
    g.clean_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_clean));
    g.row_outliers.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_clean),
                          perm.begin() + static_cast<std::ptrdiff_t>(n_clean + n_row));
    std::vector<std::size_t> rest(perm.begin() + static_cast<std::ptrdiff_t>(n_clean + n_row), perm.end());
    std::sort(g.clean_rows.begin(), g.clean_rows.end());
    std::sort(g.row_outliers.begin(), g.row_outliers.end());
    std::sort(rest.begin(), rest.end());

    for (auto i : g.row_outliers) {
        auto row = x.row(static_cast<Eigen::Index>(i));
        row = (3.0 * row.array() + 1.0).matrix();
    }

    // Cellwise outliers in the remaining rows, shifted by the column moments
    // of the array as contaminated so far.
    const std::size_t n_cell = rounded(spec.eps_c, d.size());
    const std::size_t avail = rest.size() * d.slice();
    if (n_cell > avail) {
        throw std::invalid_argument("generate: " + std::to_string(n_cell) + " cellwise outliers requested but only " +
                                    std::to_string(avail) + " cells are available");
    }
    std::vector<char> is_cell(d.size(), 0);
    if (n_cell > 0) {
        const Vector mean = x.colwise().mean().transpose();
        Vector sd(JK);
        for (Eigen::Index c = 0; c < JK; ++c) {
            sd(c) = I > 1 ? std::sqrt((x.col(c).array() - mean(c)).square().sum() / static_cast<double>(I - 1)) : 0.0;
        }
        for (auto s : rng.sample(avail, n_cell)) {
            const std::size_t i = rest[s / d.slice()];
            const std::size_t c = s % d.slice();
            const auto ci = static_cast<Eigen::Index>(c);
            x(static_cast<Eigen::Index>(i), ci) = mean(ci) + spec.gamma * sd(ci);
            is_cell[i * d.slice() + c] = 1;
        }
    }

    // Missing cells anywhere except on cellwise outliers
    const std::size_t n_na = rounded(spec.nu, d.size());
    if (n_na > d.size() - n_cell) throw std::invalid_argument("generate: too many missing cells requested");
    std::vector<std::uint8_t> mask(d.size(), 1);
    if (n_na > 0) {
        std::vector<std::size_t> candidates;
        candidates.reserve(d.size() - n_cell);
        for (std::size_t off = 0; off < d.size(); ++off)
            if (!is_cell[off]) candidates.push_back(off);
        for (auto s : rng.sample(candidates.size(), n_na)) mask[candidates[s]] = 0;
    }

    std::vector<double> vals(d.size());
    std::vector<double> w(d.size(), 1.0);
    std::vector<char> is_row(d.I, 0);
    for (auto i : g.row_outliers) is_row[i] = 1;
    for (std::size_t off = 0; off < d.size(); ++off) {
        const std::size_t i = off / d.slice();
        const std::size_t c = off % d.slice();
        vals[off] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        const Cell cell{i, c % d.J, c / d.J};
        if (is_cell[off]) g.cell_outliers.push_back(cell);
        if (!mask[off]) g.na_cells.push_back(cell);
        if (is_row[i] || is_cell[off] || !mask[off]) w[off] = 0.0;
    }
    g.x = Tensor3(d, std::move(vals), std::move(mask));
    g.w = Tensor3(d, std::move(w), std::vector<std::uint8_t>(d.size(), 1));
    return g;
}

double mse_regular(const Tensor3& x, const Matrix& xhat, const Tensor3& w) {
    const Dims d = x.dims();
    if (!(w.dims() == d) || static_cast<std::size_t>(xhat.rows()) != d.I ||
        static_cast<std::size_t>(xhat.cols()) != d.slice()) {
        throw std::invalid_argument("mse_regular: shape mismatch");
    }
    double s = 0.0;
    double m = 0.0;
    for (std::size_t off = 0; off < d.size(); ++off) {
        const double wt = w.value_at(off);
        if (wt == 0.0) continue;
        const double r = x.value_at(off) - xhat(static_cast<Eigen::Index>(off / d.slice()),
                                                static_cast<Eigen::Index>(off % d.slice()));
        s += wt * r * r;
        m += wt;
    }
    if (m == 0.0) throw std::invalid_argument("mse_regular: no regular cells");
    return s / m;
}

double mse_imputed(const Tensor3& x_true, const Tensor3& x_tilde, const Tensor3& w) {
    const Dims d = x_true.dims();
    if (!(x_tilde.dims() == d) || !(w.dims() == d)) throw std::invalid_argument("mse_imputed: shape mismatch");
    double s = 0.0;
    double m = 0.0;
    for (std::size_t off = 0; off < d.size(); ++off) {
        const double wt = w.value_at(off);
        m += wt;
        if (wt == 1.0) continue;
        const double r = x_true.value_at(off) - x_tilde.value_at(off);
        s += (1.0 - wt) * r * r;
    }
    const double denom = static_cast<double>(d.size()) - m;
    if (denom <= 0.0) throw std::invalid_argument("mse_imputed: no non-regular cells");
    return s / denom;
}

double subspace_angle(const Matrix& est, const Matrix& truth) {
    if (est.rows() != truth.rows() || est.cols() != truth.cols() || est.cols() == 0) {
        throw std::invalid_argument("subspace_angle: shape mismatch");
    }
    const Eigen::Index F = est.cols();
    auto basis = [F](const Matrix& m) {
        Eigen::ColPivHouseholderQR<Matrix> qr(m);
        if (qr.rank() < F) throw std::invalid_argument("subspace_angle: rank-deficient input");
        Eigen::HouseholderQR<Matrix> hq(m);
        return Matrix(hq.householderQ() * Matrix::Identity(m.rows(), F));
    };
    const Matrix q1 = basis(est);
    const Matrix q2 = basis(truth);
    const Matrix cross = q1.transpose() * q2;
    const Eigen::Index which = F >= 2 ? 1 : 0;
    const double cs = std::clamp(Eigen::JacobiSVD<Matrix>(cross).singularValues()(which), 0.0, 1.0);
    if (cs * cs < 0.5) return std::acos(cs);
    // small angles: acos near 1 loses half the digits, the sines do not
    const Vector sn = Eigen::JacobiSVD<Matrix>(q2 - q1 * cross).singularValues();
    return std::asin(std::clamp(sn(F - 1 - which), 0.0, 1.0));
}

std::vector<std::string> scenario_names() {
    return {"U", "R20", "C10", "R10C10", "NA20", "R10C10NA10", "R10C10NA20", "U40R10C10NA10",
            "R30", "U30C20", "U50R10C10"};
}

ContaminationSpec named_scenario(std::string_view name) {
    struct Entry {
        std::string_view name;
        double q[4];
    };
    static constexpr Entry table[] = {
        {"U", {1, 0, 0, 0}},
        {"R20", {0.8, 0.2, 0, 0}},
        {"C10", {0, 0, 0.1, 0}},
        {"R10C10", {0, 0.1, 0.1, 0}},
        {"NA20", {0, 0, 0, 0.2}},
        {"R10C10NA10", {0, 0.1, 0.1, 0.1}},
        {"R10C10NA20", {0, 0.1, 0.1, 0.2}},
        {"U40R10C10NA10", {0.4, 0.1, 0.1, 0.1}},
        {"R30", {0.7, 0.3, 0, 0}},
        {"U30C20", {0.3, 0, 0.2, 0}},
        {"U50R10C10", {0.5, 0.1, 0.1, 0}},
    };
    for (const auto& e : table) {
        if (e.name == name) {
            ContaminationSpec s;
            s.rho = e.q[0];
            s.eps_r = e.q[1];
            s.eps_c = e.q[2];
            s.nu = e.q[3];
            return s;
        }
    }
    throw std::invalid_argument("unknown scenario '" + std::string(name) + "'");
}

std::string to_string(Method m) { return m == Method::par ? "par" : "macro"; }

Method parse_method(std::string_view s) {
    if (s == "par") return Method::par;
    if (s == "macro") return Method::macro;
    throw std::invalid_argument("unknown method '" + std::string(s) + "' (expected par or macro)");
}

ReplicateResult evaluate(const GeneratedData& data, Method method, const ScenarioOptions& opts) {
    ReplicateResult r;
    r.method = method;
    r.mse_imp_initial = std::numeric_limits<double>::quiet_NaN();
    r.row_recall = std::numeric_limits<double>::quiet_NaN();
    const auto t0 = std::chrono::steady_clock::now();
    CpModel model;
    Tensor3 x_tilde;
    if (method == Method::par) {
        FitOptions fo = opts.par;
        fo.rank = opts.gen.rank;
        if (data.x.complete()) {
            model = als_complete(data.x, fo).model;
            x_tilde = data.x;
        } else {
            auto res = als_incomplete(data.x, fo);
            model = std::move(res.fit.model);
            x_tilde = std::move(res.imputed);
        }
    } else {
        MacroOptions mo = opts.macro;
        mo.rank = opts.gen.rank;
        auto res = macroparafac(data.x, mo);
        model = std::move(res.model);
        x_tilde = std::move(res.x_full);
        if (data.w.values() != std::vector<double>(data.w.size(), 1.0)) {
            r.mse_imp_initial = mse_imputed(data.x_clean, res.x_full_initial, data.w);
        }
        if (!data.row_outliers.empty()) {
            std::size_t hit = 0;
            for (auto i : data.row_outliers)
                hit += std::binary_search(res.rowwise_set.begin(), res.rowwise_set.end(), i) ? 1 : 0;
            r.row_recall = static_cast<double>(hit) / static_cast<double>(data.row_outliers.size());
        }
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.mse = mse_regular(data.x, reconstruct(model), data.w);
    r.b_angle = subspace_angle(model.B, data.truth.B);
    r.c_angle = subspace_angle(model.C, data.truth.C);
    bool any_irregular = false;
    for (double v : data.w.values()) any_irregular = any_irregular || v != 1.0;
    r.mse_imp = any_irregular ? mse_imputed(data.x_clean, x_tilde, data.w)
                              : std::numeric_limits<double>::quiet_NaN();
    return r;
}

std::vector<ReplicateResult> run_scenario(const std::string& name, ContaminationSpec spec, Method method,
                                          const ScenarioOptions& opts) {
    validate(spec);
    std::vector<ReplicateResult> out(opts.n_rep);
    parallel_for(opts.n_rep, [&](std::size_t r) {
        ContaminationSpec s = spec;
        s.seed = opts.seed + r;
        const GeneratedData data = generate(s, opts.gen);
        ScenarioOptions o = opts;
        o.par.seed = derive_seed(s.seed, "par");
        o.macro.seed = derive_seed(s.seed, "macro");
        out[r] = evaluate(data, method, o);
        out[r].replicate = r;
        out[r].scenario = name;
    });
    return out;
}

std::vector<SummaryRow> summarize(const std::vector<ReplicateResult>& results) {
    std::vector<SummaryRow> rows;
    std::vector<std::pair<std::string, std::string>> groups;
    for (const auto& r : results) {
        std::pair<std::string, std::string> key{r.scenario, to_string(r.method)};
        if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
    }
    using Getter = double (*)(const ReplicateResult&);
    const std::pair<const char*, Getter> metrics[] = {
        {"mse", [](const ReplicateResult& r) { return r.mse; }},
        {"b_angle", [](const ReplicateResult& r) { return r.b_angle; }},
        {"c_angle", [](const ReplicateResult& r) { return r.c_angle; }},
        {"mse_imp", [](const ReplicateResult& r) { return r.mse_imp; }},
        {"seconds", [](const ReplicateResult& r) { return r.seconds; }},
    };
    for (const auto& [scenario, method] : groups) {
        for (const auto& [metric, get] : metrics) {
            std::vector<double> v;
            for (const auto& r : results)
                if (r.scenario == scenario && to_string(r.method) == method) v.push_back(get(r));
            rows.push_back({scenario, method, metric, median_of(v), quantile_of(v, 0.25), quantile_of(v, 0.75)});
        }
    }
    return rows;
}

namespace {
std::string num(double v) {
    if (std::isnan(v)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace

void write_results_csv(std::ostream& os, const std::vector<ReplicateResult>& results) {
    os << "replicate,scenario,method,mse,b_angle,c_angle,mse_imp,seconds\n";
    for (const auto& r : results) {
        os << r.replicate << ',' << r.scenario << ',' << to_string(r.method) << ',' << num(r.mse) << ','
           << num(r.b_angle) << ',' << num(r.c_angle) << ',' << num(r.mse_imp) << ',' << num(r.seconds) << '\n';
    }
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
    os << "scenario,method,metric,median,q1,q3\n";
    for (const auto& r : rows) {
        os << r.scenario << ',' << r.method << ',' << r.metric << ',' << num(r.median) << ',' << num(r.q1) << ','
           << num(r.q3) << '\n';
    }
}

}  // namespace macrotensor
