// macrotensor command-line interface: fit, detect, diagnose, simulate, render.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "macrotensor/detect.hpp"
#include "macrotensor/diagnostics.hpp"
#include "macrotensor/io.hpp"
#include "macrotensor/linalg.hpp"
#include "macrotensor/macroparafac.hpp"
#include "macrotensor/parafac.hpp"
#include "macrotensor/simulation.hpp"
#include "macrotensor/svg.hpp"

namespace fs = std::filesystem;
using namespace macrotensor;
using nlohmann::json;

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::size_t> one_based(const std::vector<std::size_t>& v) {
    std::vector<std::size_t> out;
    for (auto i : v) out.push_back(i + 1);
    return out;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

// Cells with a nonzero value in the mask file are set missing.
void apply_na_mask(Tensor3& t, const std::string& path) {
    const Tensor3 m = read_t3(path);
    if (!(m.dims() == t.dims())) throw std::runtime_error("NA mask dims do not match the input");
    for (std::size_t off = 0; off < t.size(); ++off)
        if (m.observed_at(off) && m.value_at(off) != 0.0) t.set_missing_at(off);
}

Matrix read_dense_csv(const std::string& path) {
    auto u = read_matrix_csv(path);
    if (!u.mask.all()) throw std::runtime_error("'" + path + "' contains missing entries");
    return u.values;
}

double observed_ss(const Tensor3& t) {
    double s = 0.0;
    for (std::size_t off = 0; off < t.size(); ++off)
        if (t.observed_at(off)) s += t.value_at(off) * t.value_at(off);
    return s;
}

// ---- fit -------------------------------------------------------------------

struct FitArgs {
    std::string input;
    std::string method = "macro";
    std::size_t rank = 0;
    std::size_t h = 0;
    std::uint64_t seed = 0;
    std::size_t starts = 5;
    std::size_t max_iter = 500;
    double tol = 1e-8;
    std::size_t ndir = 250;
    std::string na_mask;
    std::string out;
    bool gzip = false;
};

int cmd_fit(const FitArgs& a) {
    Tensor3 t = read_t3(a.input);
    if (!a.na_mask.empty()) apply_na_mask(t, a.na_mask);
    const Method method = parse_method(a.method);
    FitOptions fo;
    fo.rank = a.rank;
    fo.n_starts = a.starts;
    fo.max_iter = a.max_iter;
    fo.rel_tol = a.tol;
    fo.seed = a.seed;
    ensure_dir(a.out);
    json j;
    j["method"] = a.method;
    j["rank"] = a.rank;
    j["seed"] = a.seed;
    j["dims"] = {{"I", t.dims().I}, {"J", t.dims().J}, {"K", t.dims().K}};
    j["observed_ss"] = observed_ss(t);
    CpModel model;
    if (method == Method::par) {
        FitResult fr;
        if (t.complete()) {
            fr = als_complete(t, fo);
        } else {
            auto inc = als_incomplete(t, fo);
            fr = std::move(inc.fit);
            write_t3(join(a.out, std::string("x_na.t3") + (a.gzip ? ".gz" : "")), inc.imputed, a.gzip);
        }
        model = fr.model;
        j["loss"] = fr.loss;
        j["n_iter"] = fr.n_iter;
        j["converged"] = fr.converged;
        j["rank_deficient"] = fr.rank_deficient;
        j["best_start"] = fr.start;
    } else {
        MacroOptions mo;
        mo.rank = a.rank;
        mo.h = a.h;
        mo.ndir = a.ndir;
        mo.fit = fo;
        mo.seed = a.seed;
        const MacroResult res = macroparafac(t, mo);
        model = res.model;
        j["loss"] = res.loss;
        j["n_iter"] = res.n_iter;
        j["h"] = res.h;
        j["h_star"] = one_based(res.h_star);
        j["h0"] = one_based(res.h0);
        j["rowwise_set"] = one_based(res.rowwise_set);
        j["detector_rows"] = one_based(res.detector_rows);
        j["cell_set_count"] = res.cell_set.size();
        json cells = json::array();
        for (const auto& [i, jj, k] : res.cell_set) cells.push_back({i + 1, jj + 1, k + 1});
        j["cell_set"] = cells;
        json stages = json::array();
        for (const auto& s : res.stage_log) {
            stages.push_back({{"stage", s.stage}, {"name", s.name}, {"iterations", s.iterations}, {"loss", s.loss},
                              {"notes", s.notes}});
        }
        j["stage_log"] = stages;
        j["warnings"] = res.warnings;
        const std::string ext = a.gzip ? ".t3.gz" : ".t3";
        write_t3(join(a.out, "x_full" + ext), res.x_full, a.gzip);
        write_t3(join(a.out, "x_cell" + ext), res.x_cell, a.gzip);
        write_t3(join(a.out, "residuals" + ext), res.residuals, a.gzip);
    }
    const Matrix xhat = reconstruct(model);
    const auto u = unfold_mode1(t);
    j["observed_sse"] = observed_sse(u.values, u.mask, xhat);
    write_matrix_csv(join(a.out, "A.csv"), model.A);
    write_matrix_csv(join(a.out, "B.csv"), model.B);
    write_matrix_csv(join(a.out, "C.csv"), model.C);
    write_text(join(a.out, "fit.json"), j.dump(2) + "\n");
    return 0;
}

// ---- detect ----------------------------------------------------------------

struct DetectArgs {
    std::string input;
    double cutoff_p = 0.99;
    std::size_t max_neighbors = 10;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_detect(const DetectArgs& a) {
    const bool matrix_input = ends_with(a.input, ".csv") || ends_with(a.input, ".csv.gz");
    Unfolded u;
    Dims d{};
    if (matrix_input) {
        u = read_matrix_csv(a.input);
    } else {
        const Tensor3 t = read_t3(a.input);
        d = t.dims();
        u = unfold_mode1(t);
    }
    DetectorOptions o;
    o.cutoff_p = a.cutoff_p;
    o.max_neighbors = a.max_neighbors;
    o.seed = a.seed;
    const CellFlags f = detect_cells(u.values, u.mask, o);
    ensure_dir(a.out);
    std::ostringstream cells;
    if (matrix_input) {
        cells << "row,col\n";
        for (const auto& [i, c] : f.cell_outliers) cells << i + 1 << ',' << c + 1 << '\n';
    } else {
        cells << "i,j,k\n";
        for (const auto& [i, c] : f.cell_outliers) cells << i + 1 << ',' << c % d.J + 1 << ',' << c / d.J + 1 << '\n';
    }
    write_text(join(a.out, "flagged_cells.csv"), cells.str());
    std::ostringstream rows;
    rows << "i\n";
    for (auto i : f.row_flags) rows << i + 1 << '\n';
    write_text(join(a.out, "row_flags.csv"), rows.str());
    if (matrix_input) {
        write_matrix_csv(join(a.out, "imputed.csv"), f.imputed);
    } else {
        write_t3(join(a.out, "imputed.t3"), fold_mode1(f.imputed, d));
    }
    return 0;
}

// ---- diagnose --------------------------------------------------------------

struct DiagnoseArgs {
    std::string fit_dir;
    std::string input;
    std::string na_mask;
    std::string out;
    double p_cell = 0.998;
    double p_sd = 0.998;
    std::size_t agg = 1;
    std::vector<std::size_t> samples;
    std::uint64_t seed = 0;
};

std::string find_t3(const std::string& dir, const std::string& stem) {
    for (const char* ext : {".t3", ".t3.gz"}) {
        const std::string p = join(dir, stem + ext);
        if (fs::exists(p)) return p;
    }
    throw std::runtime_error("fit directory '" + dir + "' has no " + stem + ".t3 (was it fitted with --method macro?)");
}

int cmd_diagnose(const DiagnoseArgs& a) {
    Tensor3 x = read_t3(a.input);
    if (!a.na_mask.empty()) apply_na_mask(x, a.na_mask);
    const json fj = json::parse(read_text(join(a.fit_dir, "fit.json")));
    if (fj.at("method").get<std::string>() != "macro") {
        throw std::runtime_error("diagnose needs a fit produced with --method macro");
    }
    const Dims d = x.dims();
    if (fj.at("dims").at("I").get<std::size_t>() != d.I || fj.at("dims").at("J").get<std::size_t>() != d.J ||
        fj.at("dims").at("K").get<std::size_t>() != d.K) {
        throw std::runtime_error("fit dims do not match the input");
    }
    MacroResult res;
    res.model.A = read_dense_csv(join(a.fit_dir, "A.csv"));
    res.model.B = read_dense_csv(join(a.fit_dir, "B.csv"));
    res.model.C = read_dense_csv(join(a.fit_dir, "C.csv"));
    res.h = fj.at("h").get<std::size_t>();
    res.x_full = read_t3(find_t3(a.fit_dir, "x_full"));
    res.residuals = read_t3(find_t3(a.fit_dir, "residuals"));
    res.x_cell = read_t3(find_t3(a.fit_dir, "x_cell"));
    if (!(res.x_full.dims() == d) || static_cast<std::size_t>(res.model.A.rows()) != d.I ||
        static_cast<std::size_t>(res.model.B.rows()) != d.J || static_cast<std::size_t>(res.model.C.rows()) != d.K) {
        throw std::runtime_error("fit files do not match the input dims");
    }
    for (auto s : a.samples) {
        if (s < 1 || s > d.I) throw std::runtime_error("--sample " + std::to_string(s) + " out of range 1.." + std::to_string(d.I));
    }
    const auto u = unfold_mode1(x);
    const Matrix xhat = reconstruct(res.model);
    res.x_na = fold_mode1(u.mask.select(u.values, xhat), d);
    const FitDiagnostics diag = compute_diagnostics(res, x, a.p_cell, a.p_sd, a.seed);

    ensure_dir(a.out);
    std::ostringstream csv;
    write_diagnostics_csv(csv, diag);
    write_text(join(a.out, "diagnostics.csv"), csv.str());
    const PlotSpec om = outlier_map(diag);
    const PlotSpec rr = rd_reduction_plot(diag);
    const RasterGrid rm = residual_map(diag, {}, a.agg);
    write_text(join(a.out, "outlier_map.svg"), render_svg(om));
    write_text(join(a.out, "rd_reduction.svg"), render_svg(rr));
    write_text(join(a.out, "residual_map.svg"), render_svg(rm));
    write_text(join(a.out, "outlier_map.json"), json(om).dump(1) + "\n");
    write_text(join(a.out, "rd_reduction.json"), json(rr).dump(1) + "\n");
    write_text(join(a.out, "residual_map.json"), json(rm).dump() + "\n");
    for (auto s : a.samples) {
        const RasterGrid g = sample_residual_map(diag, s - 1);
        write_text(join(a.out, "sample_" + std::to_string(s) + ".svg"), render_svg(g));
        write_text(join(a.out, "sample_" + std::to_string(s) + ".json"), json(g).dump() + "\n");
    }
    json cut = {{"c_rd", diag.c_rd}, {"c_sd", diag.c_sd}, {"c_r", diag.c_r}};
    write_text(join(a.out, "cutoffs.json"), cut.dump(2) + "\n");
    return 0;
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
    std::string scenario;
    std::vector<double> quartet;
    double gamma = 7.0;
    std::size_t reps = 20;
    std::uint64_t seed = 0;
    std::string methods = "par,macro";
    std::vector<std::size_t> dims;
    double noise = 0.2;
    std::size_t rank = 2;
    std::string out;
    bool emit_boxplot = false;
    bool emit_data = false;
    bool timing = false;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

int cmd_simulate(const SimulateArgs& a) {
    ContaminationSpec spec;
    std::string name;
    if (!a.scenario.empty()) {
        spec = named_scenario(a.scenario);
        name = a.scenario;
    } else {
        if (a.quartet.size() != 4) throw CLI::ValidationError("--quartet", "needs four comma-separated fractions");
        spec.rho = a.quartet[0];
        spec.eps_r = a.quartet[1];
        spec.eps_c = a.quartet[2];
        spec.nu = a.quartet[3];
        // A quartet matching a named scenario is reported under that name.
        for (const auto& n : scenario_names()) {
            const auto s = named_scenario(n);
            if (s.rho == spec.rho && s.eps_r == spec.eps_r && s.eps_c == spec.eps_c && s.nu == spec.nu) name = n;
        }
        if (name.empty()) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "Q%g_%g_%g_%g", spec.rho, spec.eps_r, spec.eps_c, spec.nu);
            name = buf;
        }
    }
    spec.gamma = a.gamma;
    validate(spec);
    ScenarioOptions so;
    so.n_rep = a.reps;
    so.seed = a.seed;
    so.gen.noise = a.noise;
    so.gen.rank = a.rank;
    if (!a.dims.empty()) {
        if (a.dims.size() != 3) throw CLI::ValidationError("--dims", "needs I,J,K");
        so.gen.dims = Dims{a.dims[0], a.dims[1], a.dims[2]};
    }
    std::vector<Method> methods;
    for (const auto& m : split_list(a.methods)) methods.push_back(parse_method(m));
    if (methods.empty()) throw CLI::ValidationError("--methods", "no method given");

    ensure_dir(a.out);
    std::vector<ReplicateResult> all;
    for (Method m : methods) {
        auto r = run_scenario(name, spec, m, so);
        all.insert(all.end(), r.begin(), r.end());
    }
    if (!a.timing)
        for (auto& r : all) r.seconds = 0.0;
    std::ostringstream res, sum;
    write_results_csv(res, all);
    write_summary_csv(sum, summarize(all));
    write_text(join(a.out, "results.csv"), res.str());
    write_text(join(a.out, "summary.csv"), sum.str());
    std::cout << sum.str();

    if (a.emit_boxplot) {
        std::vector<BoxSeries> series;
        for (Method m : methods) {
            BoxSeries s{to_string(m), {}};
            for (const auto& r : all)
                if (r.method == m) s.values.push_back(r.mse);
            series.push_back(std::move(s));
        }
        write_text(join(a.out, "mse_boxplot.svg"), render_boxplot_svg("MSE, scenario " + name, "MSE", series));
    }
    if (a.emit_data) {
        for (std::size_t r = 0; r < a.reps; ++r) {
            ContaminationSpec s = spec;
            s.seed = a.seed + r;
            const GeneratedData g = generate(s, so.gen);
            const std::string stem = "data_rep" + std::to_string(r);
            write_t3(join(a.out, stem + ".t3"), g.x);
            json truth;
            truth["row_outliers"] = one_based(g.row_outliers);
            truth["clean_rows"] = one_based(g.clean_rows);
            json cells = json::array();
            for (const auto& [i, j, k] : g.cell_outliers) cells.push_back({i + 1, j + 1, k + 1});
            truth["cell_outliers"] = cells;
            truth["na_count"] = g.na_cells.size();
            write_text(join(a.out, stem + "_truth.json"), truth.dump() + "\n");
        }
    }
    return 0;
}

// ---- render ----------------------------------------------------------------

int cmd_render(const std::string& input, const std::string& out) {
    const json j = json::parse(read_text(input));
    const std::string kind = j.at("kind").get<std::string>();
    std::string svg;
    if (kind == "residual_map" || kind == "sample_residual_map") {
        svg = render_svg(j.get<RasterGrid>());
    } else {
        svg = render_svg(j.get<PlotSpec>());
    }
    write_text(out, svg);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust PARAFAC for incomplete three-way arrays with rowwise and cellwise outliers"};
    app.require_subcommand(1);

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit classical PARAFAC or MacroPARAFAC to a tensor file");
    fit->set_help_flag("--help", "Print this help message and exit");  // frees the name h for --h
    fit->add_option("input", fa.input, "Tensor file (i,j,k,value)")->required()->check(CLI::ExistingFile);
    fit->add_option("--method", fa.method, "par or macro")->check(CLI::IsMember({"par", "macro"}));
    fit->add_option("--rank,-F", fa.rank, "Number of components")->required()->check(CLI::PositiveNumber);
    fit->add_option("--h", fa.h, "Subset size (default ceil(0.75 (I+1)))");
    fit->add_option("--seed", fa.seed, "Random seed");
    fit->add_option("--starts", fa.starts, "Random starts")->check(CLI::PositiveNumber);
    fit->add_option("--max-iter", fa.max_iter, "ALS iteration limit")->check(CLI::PositiveNumber);
    fit->add_option("--tol", fa.tol, "Relative loss-change tolerance")->check(CLI::PositiveNumber);
    fit->add_option("--ndir", fa.ndir, "Outlyingness directions")->check(CLI::PositiveNumber);
    fit->add_option("--na-mask", fa.na_mask, "Tensor file; cells with nonzero value are set missing")
        ->check(CLI::ExistingFile);
    fit->add_flag("--gzip", fa.gzip, "Compress written tensor files");
    fit->add_option("--out", fa.out, "Output directory")->required();

    DetectArgs da;
    auto* det = app.add_subcommand("detect", "Flag deviating cells of a tensor file or CSV matrix");
    det->add_option("input", da.input, "Tensor file or .csv matrix")->required()->check(CLI::ExistingFile);
    det->add_option("--cutoff-p", da.cutoff_p, "Flagging probability")->check(CLI::Range(0.5, 1.0));
    det->add_option("--max-neighbors", da.max_neighbors, "Neighbour columns per column");
    det->add_option("--seed", da.seed, "Random seed");
    det->add_option("--out", da.out, "Output directory")->required();

    DiagnoseArgs ga;
    auto* dg = app.add_subcommand("diagnose", "Outlier diagnostics and maps for a MacroPARAFAC fit");
    dg->add_option("fit_dir", ga.fit_dir, "Directory written by 'fit --method macro'")->required()->check(CLI::ExistingDirectory);
    dg->add_option("input", ga.input, "Tensor file that was fitted")->required()->check(CLI::ExistingFile);
    dg->add_option("--na-mask", ga.na_mask, "Same NA mask as used for the fit")->check(CLI::ExistingFile);
    dg->add_option("--out", ga.out, "Output directory")->required();
    dg->add_option("--p-cell", ga.p_cell, "Probability for the cell cutoff")->check(CLI::Range(0.5, 1.0));
    dg->add_option("--p-sd", ga.p_sd, "Probability for the score-distance cutoff")->check(CLI::Range(0.5, 1.0));
    dg->add_option("--agg", ga.agg, "Residual-map column block size")->check(CLI::PositiveNumber);
    dg->add_option("--sample", ga.samples, "1-based sample for a J x K residual map (repeatable)");
    dg->add_option("--seed", ga.seed, "Seed for the score MCD");

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Run the simulation benchmark");
    auto* sc = sim->add_option("--scenario", sa.scenario, "Named scenario")->check(CLI::IsMember(scenario_names()));
    auto* qt = sim->add_option("--quartet", sa.quartet, "rho,eps_r,eps_c,nu")->delimiter(',')->expected(4);
    sc->excludes(qt);
    qt->excludes(sc);
    sim->add_option("--gamma", sa.gamma, "Cellwise shift in column sds");
    sim->add_option("--reps", sa.reps, "Replicates")->check(CLI::PositiveNumber);
    sim->add_option("--seed", sa.seed, "Base seed; replicate r uses seed + r");
    sim->add_option("--methods", sa.methods, "Comma-separated subset of par,macro");
    sim->add_option("--dims", sa.dims, "I,J,K")->delimiter(',')->expected(3);
    sim->add_option("--noise", sa.noise, "Noise fraction")->check(CLI::Range(0.0, 0.99));
    sim->add_option("--rank", sa.rank, "Generating rank (1 or 2)")->check(CLI::Range(1, 2));
    sim->add_option("--out", sa.out, "Output directory")->required();
    sim->add_flag("--emit-boxplot", sa.emit_boxplot, "Write mse_boxplot.svg");
    sim->add_flag("--emit-data", sa.emit_data, "Write each generated data set and its ground truth");
    sim->add_flag("--timing", sa.timing, "Record wall-clock seconds (otherwise 0, keeping output reproducible)");

    std::string render_in, render_out;
    auto* ren = app.add_subcommand("render", "Render a plot or map JSON description to SVG");
    ren->add_option("input", render_in, "JSON written by diagnose")->required()->check(CLI::ExistingFile);
    ren->add_option("--out", render_out, "SVG file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        if (*fit) return cmd_fit(fa);
        if (*det) return cmd_detect(da);
        if (*dg) return cmd_diagnose(ga);
        if (*sim) {
            if (sa.scenario.empty() && sa.quartet.empty()) {
                std::cerr << "simulate: one of --scenario or --quartet is required\n";
                return 2;
            }
            return cmd_simulate(sa);
        }
        if (*ren) return cmd_render(render_in, render_out);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
