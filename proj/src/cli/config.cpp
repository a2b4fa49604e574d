#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "spstack/cli.hpp"

namespace spstack::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
    throw std::runtime_error("parse_config: field '" + field + "': " + what);
}

double get_positive(const json& j, const std::string& field, double fallback) {
    if (!j.contains(field)) return fallback;
    const double v = j.at(field).get<double>();
    if (!(v > 0.0)) fail(field, "must be positive");
    return v;
}

std::vector<double> get_grid(const json& j, const std::string& field,
                             std::vector<double> fallback) {
    if (!j.contains(field)) return fallback;
    std::vector<double> v = j.at(field).get<std::vector<double>>();
    if (v.empty()) fail(field, "grid list must be non-empty");
    return v;
}

template <typename T>
std::vector<T> get_list(const json& j, const std::string& field, std::vector<T> fallback) {
    if (!j.contains(field)) return fallback;
    return j.at(field).get<std::vector<T>>();
}

ColumnSpec parse_columns(const json& j, const std::string& scope) {
    ColumnSpec spec;
    if (!j.contains("path")) fail(scope + ".path", "required");
    spec.path = j.at("path").get<std::string>();
    if (!j.contains("coords")) fail(scope + ".coords", "required");
    spec.coord_cols = j.at("coords").get<std::vector<std::string>>();
    if (spec.coord_cols.empty() || spec.coord_cols.size() > 2)
        fail(scope + ".coords", "need 1 or 2 coordinate columns");
    spec.covariate_cols = get_list<std::string>(j, "covariates", {});
    if (j.contains("outcome")) spec.outcome_col = j.at("outcome").get<std::string>();
    spec.intercept = j.value("intercept", true);
    spec.allow_duplicates = j.value("allow_duplicates", false);
    return spec;
}

MaternParams parse_kernel(const json& j, const std::string& scope, MaternParams fallback) {
    MaternParams params = fallback;
    params.phi = get_positive(j, "phi", fallback.phi);
    params.nu = get_positive(j, "nu", fallback.nu);
    (void)scope;
    return params;
}

}  // namespace

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("parse_config: cannot open '" + path + "'");
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("parse_config: " + std::string(e.what()));
    }

    RunConfig config;
    const std::string mode = root.value("mode", "fit");
    if (mode == "fit")
        config.mode = Mode::fit;
    else if (mode == "simulate")
        config.mode = Mode::simulate;
    else if (mode == "diagnostics")
        config.mode = Mode::diagnostics;
    else
        fail("mode", "must be one of fit, simulate, diagnostics");

    config.seed = root.value("seed", std::uint64_t{1});
    config.threads = root.value("threads", 0);
    config.out_dir = root.value("out", std::string("."));

    if (root.contains("grid")) {
        const json& g = root.at("grid");
        config.grid_phi = get_grid(g, "phi", config.grid_phi);
        config.grid_nu = get_grid(g, "nu", config.grid_nu);
        config.grid_delta2 = get_grid(g, "delta2", config.grid_delta2);
    }
    if (root.contains("prior")) {
        const json& pr = root.at("prior");
        config.a_sigma = get_positive(pr, "a_sigma", 2.0);
        config.b_sigma = get_positive(pr, "b_sigma", 2.0);
        if (pr.contains("mu_beta")) config.mu_beta = pr.at("mu_beta").get<std::vector<double>>();
        if (pr.contains("v_beta")) {
            if (pr.at("v_beta").is_array())
                config.v_beta_diag = pr.at("v_beta").get<std::vector<double>>();
            else
                config.v_beta_scale = get_positive(pr, "v_beta", 4.0);
        }
    }
    if (root.contains("cv")) {
        const json& cv = root.at("cv");
        config.k_folds = cv.value("k", 10);
        if (config.k_folds < 2) fail("cv.k", "must be >= 2");
        config.nonneg = cv.value("nonneg", true);
        config.mc_lppd = cv.value("mc_lppd", false);
        config.mc_draws = cv.value("mc_draws", Index{2000});
        if (config.mc_draws < 1) fail("cv.mc_draws", "must be >= 1");
    }

    if (config.mode == Mode::fit) {
        if (!root.contains("data")) fail("data", "required in fit mode");
        config.data = parse_columns(root.at("data"), "data");
        if (config.data.outcome_col.empty()) fail("data.outcome", "required in fit mode");
        if (root.contains("predict"))
            config.predict_data = parse_columns(root.at("predict"), "predict");
    }

    if (root.contains("simulate")) {
        const json& s = root.at("simulate");
        config.sim.n = s.value("n", Index{200});
        config.sim.n_holdout = s.value("n_holdout", Index{50});
        config.sim.dim = s.value("dim", 2);
        const std::vector<double> beta =
            get_list<double>(s, "beta", {1.0, 2.0});
        config.sim.beta_true = Eigen::Map<const Vector>(beta.data(),
                                                        static_cast<Index>(beta.size()));
        config.sim.sigma2_true = get_positive(s, "sigma2", 1.0);
        config.sim.tau2_true = get_positive(s, "tau2", 1.0);
        config.sim.kernel_true = parse_kernel(s, "simulate", {7.0, 1.0});
        config.sim.replicates = s.value("replicates", 30);
        config.sim.seed = config.seed;
        config.sim.validate();
    } else {
        config.sim.beta_true = Vector::Zero(2);
        config.sim.beta_true << 1.0, 2.0;
        config.sim.seed = config.seed;
    }

    if (root.contains("diagnostics")) {
        const json& dg = root.at("diagnostics");
        DiagnosticsConfig& d = config.diag;
        d.which = get_list<std::string>(dg, "which", d.which);
        for (const auto& w : d.which)
            if (w != "projection" && w != "e2" && w != "sigma2_trace" && w != "blp")
                fail("diagnostics.which", "unknown diagnostic '" + w + "'");
        if (dg.contains("projection")) {
            const json& pj = dg.at("projection");
            d.projection_sizes = get_list<Index>(pj, "sizes", d.projection_sizes);
            d.projection_seeds = pj.value("seeds", d.projection_seeds);
            d.projection_dim = pj.value("dim", d.projection_dim);
            d.projection_kernel = parse_kernel(pj, "projection", d.projection_kernel);
            d.projection_delta2 = get_positive(pj, "delta2", d.projection_delta2);
        }
        if (dg.contains("e2")) {
            const json& ej = dg.at("e2");
            d.e2_sizes = get_list<Index>(ej, "sizes", d.e2_sizes);
            d.e2_dim = ej.value("dim", d.e2_dim);
            d.e2_kernel = parse_kernel(ej, "e2", d.e2_kernel);
            d.e2_delta2 = get_positive(ej, "delta2", d.e2_delta2);
            d.e2_tau2 = get_positive(ej, "tau2", d.e2_tau2);
        }
        if (dg.contains("sigma2_trace")) {
            const json& sj = dg.at("sigma2_trace");
            d.sigma2_sizes = get_list<Index>(sj, "sizes", d.sigma2_sizes);
            d.sigma2_phis = get_list<double>(sj, "phis", d.sigma2_phis);
            d.sigma2_nu = get_positive(sj, "nu", d.sigma2_nu);
            d.sigma2_delta2 = get_positive(sj, "delta2", d.sigma2_delta2);
            d.sigma2_kernel_true = parse_kernel(sj, "sigma2_trace", d.sigma2_kernel_true);
            d.sigma2_sigma2_true = get_positive(sj, "sigma2", d.sigma2_sigma2_true);
            d.sigma2_tau2_true = get_positive(sj, "tau2", d.sigma2_tau2_true);
            d.sigma2_replicates = sj.value("replicates", d.sigma2_replicates);
        }
        if (dg.contains("blp")) {
            const json& bj = dg.at("blp");
            d.blp_sizes = get_list<Index>(bj, "sizes", d.blp_sizes);
            if (bj.contains("truth")) {
                const json& tj = bj.at("truth");
                d.blp_truth.kernel = parse_kernel(tj, "blp.truth", d.blp_truth.kernel);
                d.blp_truth.sigma2 = get_positive(tj, "sigma2", d.blp_truth.sigma2);
                d.blp_truth.tau2 = tj.value("tau2", d.blp_truth.tau2);
            }
            if (bj.contains("fitted")) {
                const json& fj = bj.at("fitted");
                d.blp_fitted.kernel = parse_kernel(fj, "blp.fitted", d.blp_fitted.kernel);
                d.blp_fitted.delta2 = get_positive(fj, "delta2", d.blp_fitted.delta2);
            }
        }
    }
    return config;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace spstack::cli
