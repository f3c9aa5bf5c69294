#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "macrotensor/macroparafac.hpp"
#include "macrotensor/parafac.hpp"
#include "macrotensor/tensor.hpp"

namespace macrotensor {

/// Contamination quartet (rho, eps_r, eps_c, nu) plus the cellwise shift gamma.
struct ContaminationSpec {
    double rho = 1.0;
    double eps_r = 0.0;
    double eps_c = 0.0;
    double nu = 0.0;
    double gamma = 7.0;
    std::uint64_t seed = 0;
};

struct GeneratorOptions {
    Dims dims{50, 76, 61};
    /// 1 or 2; the mixture table only defines two components.
    std::size_t rank = 2;
    /// Fraction of noise in the total variance.
    double noise = 0.2;
};

struct GeneratedData {
    /// Contaminated array with missing cells.
    Tensor3 x;
    /// Pure data plus noise, before contamination.
    Tensor3 x_clean;
    /// Generating scores and loadings (loadings not normalised).
    CpModel truth;
    std::vector<std::size_t> clean_rows;
    std::vector<std::size_t> row_outliers;
    std::vector<Cell> cell_outliers;
    std::vector<Cell> na_cells;
    /// 1 on regular cells, 0 on rowwise-outlier rows, cellwise outliers and missing cells.
    Tensor3 w;
};

/// Validates the quartet; throws std::invalid_argument when a fraction is
/// outside [0, 1] or rho + eps_r > 1.
void validate(const ContaminationSpec& spec);

/// Simulated fluorescence-like data: loadings are the three-component
/// Gaussian mixture densities evaluated on an equispaced grid, scores are
/// N((10,10), diag(1,2)), X_pure = 100 A (C kr B)', Gaussian noise scaled to
/// the requested fraction, then rowwise outliers (3x + 1), cellwise
/// outliers (column mean + gamma column sd) and missing cells.
/// Throws std::invalid_argument when the requested counts do not fit.
GeneratedData generate(const ContaminationSpec& spec, const GeneratorOptions& opts = {});

/// Grid and mixture densities behind the generated loadings.
Matrix mixture_loadings_b(std::size_t J);
Matrix mixture_loadings_c(std::size_t K);

/// (1/m) sum w (x - xhat)^2 with m = sum w. Throws when m = 0 or shapes differ.
double mse_regular(const Tensor3& x, const Matrix& xhat, const Tensor3& w);
/// (1/(IJK - m)) sum (1 - w)(x_true - x_tilde)^2. Throws when every cell is regular.
double mse_imputed(const Tensor3& x_true, const Tensor3& x_tilde, const Tensor3& w);
/// Second principal angle between the column spaces (first when F = 1).
/// Throws std::invalid_argument on rank deficiency or shape mismatch.
double subspace_angle(const Matrix& est, const Matrix& truth);

/// Quartet for a named scenario (U, R20, C10, R10C10, NA20, R10C10NA10,
/// R10C10NA20, U40R10C10NA10, R30, U30C20, U50R10C10). gamma keeps its default.
/// Throws std::invalid_argument for an unknown name.
ContaminationSpec named_scenario(std::string_view name);
std::vector<std::string> scenario_names();

enum class Method { par, macro };
std::string to_string(Method m);
Method parse_method(std::string_view s);

struct ScenarioOptions {
    GeneratorOptions gen{};
    std::size_t n_rep = 20;
    std::uint64_t seed = 0;
    /// Settings for PARAFAC; rank is taken from gen.rank.
    FitOptions par{};
    /// Settings for MacroPARAFAC; rank is taken from gen.rank.
    MacroOptions macro{};
};

struct ReplicateResult {
    std::size_t replicate = 0;
    std::string scenario;
    Method method = Method::par;
    double mse = 0.0;
    double b_angle = 0.0;
    double c_angle = 0.0;
    /// NaN when every cell is regular.
    double mse_imp = 0.0;
    /// MSE_imp of the detector imputation before any fit (MacroPARAFAC only, NaN otherwise).
    double mse_imp_initial = 0.0;
    double seconds = 0.0;
    /// Fraction of generated rowwise outliers in the final rowwise set (MacroPARAFAC only).
    double row_recall = 0.0;
};

/// Fits one generated data set with the given method.
ReplicateResult evaluate(const GeneratedData& data, Method method, const ScenarioOptions& opts);

/// Runs n_rep replicates; replicate r uses generator seed opts.seed + r.
/// Results are ordered by replicate.
std::vector<ReplicateResult> run_scenario(const std::string& name, ContaminationSpec spec,
                                          Method method, const ScenarioOptions& opts);

struct SummaryRow {
    std::string scenario;
    std::string method;
    std::string metric;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
};

std::vector<SummaryRow> summarize(const std::vector<ReplicateResult>& results);

/// CSV columns: replicate,scenario,method,mse,b_angle,c_angle,mse_imp,seconds.
void write_results_csv(std::ostream& os, const std::vector<ReplicateResult>& results);
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);

}  // namespace macrotensor
