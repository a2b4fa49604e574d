#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spstack/sim.hpp"
#include "spstack/theory.hpp"

namespace spstack::cli {

/// CSV column roles for one input file.
struct ColumnSpec {
    std::string path;
    std::vector<std::string> coord_cols;      // 1 or 2 names
    std::vector<std::string> covariate_cols;  // optional
    std::string outcome_col;                  // optional for prediction files
    bool intercept = true;                    // prepend a column of ones
    bool allow_duplicates = false;
};

struct IngestResult {
    SpatialDataset dataset;
    bool has_outcome = false;
};

/// Strict CSV reader: header required, every referenced column numeric, and
/// missing values rejected with the offending row number.
IngestResult ingest_csv(const ColumnSpec& spec);

enum class Mode { fit, simulate, diagnostics };

struct DiagnosticsConfig {
    std::vector<std::string> which = {"projection", "e2", "sigma2_trace", "blp"};

    std::vector<Index> projection_sizes = {50, 100, 200};
    int projection_seeds = 10;
    int projection_dim = 2;
    MaternParams projection_kernel{7.0, 1.0};
    double projection_delta2 = 1.0;

    std::vector<Index> e2_sizes = {100, 200, 400};
    int e2_dim = 1;
    MaternParams e2_kernel{7.0, 1.0};
    double e2_delta2 = 1.0;
    double e2_tau2 = 1.0;

    std::vector<Index> sigma2_sizes = {100, 200, 400, 800};
    std::vector<double> sigma2_phis = {4.0, 12.0};
    double sigma2_nu = 0.5;
    double sigma2_delta2 = 2.0;
    MaternParams sigma2_kernel_true{7.0, 0.5};
    double sigma2_sigma2_true = 1.0;
    double sigma2_tau2_true = 1.0;
    int sigma2_replicates = 10;

    std::vector<Index> blp_sizes = {25, 50, 100, 200};
    BlpTruth blp_truth{{7.0, 0.5}, 1.0, 0.25};
    BlpFitted blp_fitted{{7.0, 0.5}, 0.25};
};

struct RunConfig {
    Mode mode = Mode::fit;
    std::uint64_t seed = 1;
    int threads = 0;  // 0 = all hardware threads
    std::string out_dir = ".";

    // fit mode
    ColumnSpec data;
    std::optional<ColumnSpec> predict_data;
    std::vector<double> grid_phi = {3.0, 14.0, 25.0, 36.0};
    std::vector<double> grid_nu = {0.5, 1.0, 1.5, 1.75};
    std::vector<double> grid_delta2 = {0.1, 0.5, 1.0, 2.0};
    double a_sigma = 2.0;
    double b_sigma = 2.0;
    std::vector<double> mu_beta;       // empty = zeros
    std::vector<double> v_beta_diag;   // empty = v_beta_scale * I
    double v_beta_scale = 4.0;
    int k_folds = 10;
    bool nonneg = true;
    bool mc_lppd = false;
    Index mc_draws = 2000;

    // simulate mode
    SimConfig sim;

    // diagnostics mode
    DiagnosticsConfig diag;
};

/// Parse and validate a JSON config file, filling documented defaults.
RunConfig parse_config(const std::string& path);

/// Execute one run; writes artifacts under config.out_dir and returns the
/// process exit status.
int run(const RunConfig& config);

/// "%.17g" -- wide enough to round-trip any double.
std::string format_double(double v);

}  // namespace spstack::cli
