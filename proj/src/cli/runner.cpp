#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "spstack/cli.hpp"
#include "spstack/rng.hpp"

namespace spstack::cli {

namespace {

std::string jnum(double v) {
    if (!std::isfinite(v)) return "null";
    return format_double(v);
}

std::string jnum_list(const Vector& v) {
    std::ostringstream out;
    out << "[";
    for (Index i = 0; i < v.size(); ++i) {
        if (i > 0) out << ", ";
        out << jnum(v(i));
    }
    out << "]";
    return out.str();
}

std::string jnum_list(const std::vector<double>& v) {
    return jnum_list(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/" + name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    return out;
}

void write_solver_block(std::ofstream& out, const StackingWeights& w, const char* indent) {
    out << indent << "\"weights\": " << jnum_list(w.w) << ",\n";
    out << indent << "\"objective\": " << jnum(w.objective) << ",\n";
    out << indent << "\"iterations\": " << w.iterations << ",\n";
    out << indent << "\"converged\": " << (w.converged ? "true" : "false") << ",\n";
    out << indent << "\"nonzero_weights\": " << w.nonzero_count() << "\n";
}

void write_weights_json(const std::string& dir, const CandidateGrid& grid,
                        const StackingWeights& means, const StackingWeights& densities) {
    std::ofstream out = open_out(dir, "weights.json");
    out << "{\n";
    out << "  \"grid\": {\n";
    out << "    \"phi\": " << jnum_list(grid.phi) << ",\n";
    out << "    \"nu\": " << jnum_list(grid.nu) << ",\n";
    out << "    \"delta2\": " << jnum_list(grid.delta2) << "\n";
    out << "  },\n";
    out << "  \"candidate_order\": \"phi outer, nu middle, delta2 inner\",\n";
    out << "  \"candidates\": [\n";
    for (Index g = 0; g < grid.size(); ++g) {
        const Candidate& c = grid.candidates[static_cast<size_t>(g)];
        out << "    {\"phi\": " << jnum(c.phi) << ", \"nu\": " << jnum(c.nu)
            << ", \"delta2\": " << jnum(c.delta2) << "}"
            << (g + 1 < grid.size() ? "," : "") << "\n";
    }
    out << "  ],\n";
    out << "  \"solvers\": {\n";
    out << "    \"means\": {\n";
    write_solver_block(out, means, "      ");
    out << "    },\n";
    out << "    \"densities\": {\n";
    write_solver_block(out, densities, "      ");
    out << "    }\n";
    out << "  }\n";
    out << "}\n";
}

struct CandidatePredictions {
    std::vector<Index> active;
    std::vector<double> weight;
    std::vector<PredictiveT> pred;
};

CandidatePredictions predict_active(const StackedModel& model, const SpatialDataset& points) {
    CandidatePredictions out;
    for (Index g = 0; g < model.grid.size(); ++g) {
        const double wg = model.weights.w(g);
        if (wg == 0.0) continue;
        out.active.push_back(g);
        out.weight.push_back(wg);
        out.pred.push_back(
            predict((*model.fits)[static_cast<size_t>(g)], points.chi, points.X));
    }
    return out;
}

double mixture_mean(const CandidatePredictions& cp, Index i) {
    double m = 0.0;
    for (size_t a = 0; a < cp.active.size(); ++a) m += cp.weight[a] * cp.pred[a].location(i);
    return m;
}

double mixture_variance(const CandidatePredictions& cp, Index i) {
    const double m = mixture_mean(cp, i);
    double acc = 0.0;
    for (size_t a = 0; a < cp.active.size(); ++a) {
        const PredictiveT& p = cp.pred[a];
        const double comp_var = p.b_star / (p.a_star - 1.0) * p.point_scale(i);
        acc += cp.weight[a] * (comp_var + p.location(i) * p.location(i));
    }
    return acc - m * m;
}

double mixture_lppd(const CandidatePredictions& cp, Index i, double y) {
    double max_lp = -std::numeric_limits<double>::infinity();
    std::vector<double> lps(cp.active.size());
    for (size_t a = 0; a < cp.active.size(); ++a) {
        const PredictiveT& p = cp.pred[a];
        lps[a] = log_predictive_density(p.a_star, p.b_star, p.point_scale(i), p.location(i), y);
        max_lp = std::max(max_lp, lps[a]);
    }
    double acc = 0.0;
    for (size_t a = 0; a < cp.active.size(); ++a)
        acc += cp.weight[a] * std::exp(lps[a] - max_lp);
    return max_lp + std::log(acc);
}

PriorSpec build_prior(const RunConfig& config, Index p) {
    PriorSpec prior;
    prior.a_sigma = config.a_sigma;
    prior.b_sigma = config.b_sigma;
    prior.delta2 = 1.0;  // per-candidate value is substituted along the grid
    if (config.mu_beta.empty()) {
        prior.mu_beta = Vector::Zero(p);
    } else {
        if (static_cast<Index>(config.mu_beta.size()) != p)
            throw std::runtime_error("prior.mu_beta length does not match the design (p = " +
                                     std::to_string(p) + ")");
        prior.mu_beta =
            Eigen::Map<const Vector>(config.mu_beta.data(), static_cast<Index>(p));
    }
    if (config.v_beta_diag.empty()) {
        prior.V_beta = config.v_beta_scale * Matrix::Identity(p, p);
    } else {
        if (static_cast<Index>(config.v_beta_diag.size()) != p)
            throw std::runtime_error("prior.v_beta length does not match the design");
        prior.V_beta = Matrix::Zero(p, p);
        for (Index i = 0; i < p; ++i) prior.V_beta(i, i) = config.v_beta_diag[static_cast<size_t>(i)];
    }
    return prior;
}

void run_fit(const RunConfig& config) {
    const IngestResult ingested = ingest_csv(config.data);
    if (!ingested.has_outcome)
        throw std::runtime_error("fit mode: outcome column '" + config.data.outcome_col +
                                 "' not present in " + config.data.path);
    const SpatialDataset& data = ingested.dataset;
    for (const auto& w : check_dataset(data)) std::cerr << "warning: " << w << "\n";

    const CandidateGrid grid =
        CandidateGrid::cartesian(config.grid_phi, config.grid_nu, config.grid_delta2);
    const PriorSpec prior = build_prior(config, data.p());
    const FoldAssignment folds = assign_folds(data.n(), config.k_folds, config.seed);

    CvOptions options;
    options.threads = config.threads;
    options.monte_carlo_lppd = config.mc_lppd;
    options.mc_draws = config.mc_draws;
    options.mc_seed = config.seed;
    const CvTable cv = build_cv_table(data, prior, grid, folds, options);

    const StackingWeights w_means = solve_weights_means(data.y, cv.yhat, config.nonneg);
    const StackingWeights w_dens = solve_weights_densities(cv.lp);
    write_weights_json(config.out_dir, grid, w_means, w_dens);

    auto fits = std::make_shared<const std::vector<ConjugateFit>>(
        fit_all_candidates(data, prior, grid, config.threads));
    const StackedModel model_means{grid, w_means, fits};
    const StackedModel model_dens{grid, w_dens, fits};

    bool have_holdout_metrics = false;
    MetricReport holdout_means, holdout_dens;
    Index n_predict = 0;

    if (config.predict_data) {
        const IngestResult newpts = ingest_csv(*config.predict_data);
        if (newpts.dataset.p() != data.p())
            throw std::runtime_error("predict file design has " +
                                     std::to_string(newpts.dataset.p()) +
                                     " columns, training design has " +
                                     std::to_string(data.p()));
        n_predict = newpts.dataset.n();
        const CandidatePredictions cp_means = predict_active(model_means, newpts.dataset);
        const CandidatePredictions cp_dens = predict_active(model_dens, newpts.dataset);
        const double dof = (*fits)[0].dof();

        std::ofstream out = open_out(config.out_dir, "predictions.csv");
        for (size_t j = 0; j < config.predict_data->coord_cols.size(); ++j)
            out << config.predict_data->coord_cols[j] << ",";
        out << "mean_means,var_means,mean_densities,var_densities,dof";
        if (newpts.has_outcome) out << ",lppd_means,lppd_densities";
        out << "\n";
        for (Index i = 0; i < newpts.dataset.n(); ++i) {
            for (Index j = 0; j < newpts.dataset.chi.dim(); ++j)
                out << format_double(newpts.dataset.chi.coords(i, j)) << ",";
            out << format_double(mixture_mean(cp_means, i)) << ","
                << format_double(mixture_variance(cp_means, i)) << ","
                << format_double(mixture_mean(cp_dens, i)) << ","
                << format_double(mixture_variance(cp_dens, i)) << ","
                << format_double(dof);
            if (newpts.has_outcome)
                out << "," << format_double(mixture_lppd(cp_means, i, newpts.dataset.y(i)))
                    << "," << format_double(mixture_lppd(cp_dens, i, newpts.dataset.y(i)));
            out << "\n";
        }

        if (newpts.has_outcome) {
            holdout_means = evaluate(model_means, newpts.dataset);
            holdout_dens = evaluate(model_dens, newpts.dataset);
            have_holdout_metrics = true;
        }
    }

    std::ofstream out = open_out(config.out_dir, "metrics.json");
    out << "{\n";
    out << "  \"n\": " << data.n() << ",\n";
    out << "  \"p\": " << data.p() << ",\n";
    out << "  \"candidates\": " << grid.size() << ",\n";
    out << "  \"k_folds\": " << config.k_folds << ",\n";
    out << "  \"seed\": " << config.seed << ",\n";
    out << "  \"solvers\": {\n";
    out << "    \"means\": {\"objective\": " << jnum(w_means.objective)
        << ", \"nonzero_weights\": " << w_means.nonzero_count()
        << ", \"converged\": " << (w_means.converged ? "true" : "false") << "},\n";
    out << "    \"densities\": {\"objective\": " << jnum(w_dens.objective)
        << ", \"nonzero_weights\": " << w_dens.nonzero_count()
        << ", \"converged\": " << (w_dens.converged ? "true" : "false") << "}\n";
    out << "  }";
    if (config.predict_data) {
        out << ",\n  \"predict\": {\n";
        out << "    \"n\": " << n_predict;
        if (have_holdout_metrics) {
            out << ",\n    \"mspe_means\": " << jnum(holdout_means.mspe) << ",\n";
            out << "    \"mlpd_means\": " << jnum(holdout_means.mlpd) << ",\n";
            out << "    \"mspe_densities\": " << jnum(holdout_dens.mspe) << ",\n";
            out << "    \"mlpd_densities\": " << jnum(holdout_dens.mlpd);
        }
        out << "\n  }";
    }
    out << "\n}\n";
}

void run_simulate(const RunConfig& config) {
    const CandidateGrid grid =
        CandidateGrid::cartesian(config.grid_phi, config.grid_nu, config.grid_delta2);
    const PriorSpec prior = build_prior(config, config.sim.beta_true.size());
    const StudyResult study =
        run_study(config.sim, grid, prior, config.k_folds, config.threads);

    std::ofstream csv = open_out(config.out_dir, "sim_metrics.csv");
    csv << "replicate,method,mspe,msez,mlpd,nonzero_weights,objective,converged\n";
    for (const auto& row : study.rows)
        for (const auto& m : row.methods)
            csv << row.replicate << "," << m.method << "," << format_double(m.metrics.mspe)
                << "," << format_double(m.metrics.msez) << ","
                << format_double(m.metrics.mlpd) << "," << m.nonzero_weights << ","
                << format_double(m.objective) << "," << (m.converged ? 1 : 0) << "\n";

    std::ofstream out = open_out(config.out_dir, "sim_summary.json");
    out << "{\n";
    out << "  \"config\": {\"n\": " << config.sim.n << ", \"n_holdout\": " << config.sim.n_holdout
        << ", \"dim\": " << config.sim.dim << ", \"replicates\": " << config.sim.replicates
        << ", \"phi\": " << jnum(config.sim.kernel_true.phi)
        << ", \"nu\": " << jnum(config.sim.kernel_true.nu)
        << ", \"sigma2\": " << jnum(config.sim.sigma2_true)
        << ", \"tau2\": " << jnum(config.sim.tau2_true) << ", \"seed\": " << config.seed
        << "},\n";
    out << "  \"methods\": {\n";
    const char* names[] = {"stack-means", "stack-densities", "oracle"};
    for (int m = 0; m < 3; ++m) {
        out << "    \"" << names[m] << "\": {";
        out << "\"median_mspe\": " << jnum(study.median_metric(names[m], "mspe")) << ", ";
        out << "\"median_msez\": " << jnum(study.median_metric(names[m], "msez")) << ", ";
        out << "\"median_mlpd\": " << jnum(study.median_metric(names[m], "mlpd")) << ", ";
        out << "\"mean_nonzero_weights\": " << jnum(study.mean_nonzero_weights(names[m]));
        out << "}" << (m < 2 ? "," : "") << "\n";
    }
    out << "  }\n";
    out << "}\n";
}

SpatialDataset uniform_trend_dataset(Index n, int dim, std::uint64_t seed) {
    Rng rng(seed);
    Matrix coords(n, dim);
    for (Index i = 0; i < n; ++i)
        for (int d = 0; d < dim; ++d) coords(i, d) = rng.uniform();
    SpatialDataset data;
    data.chi = LocationSet(std::move(coords));
    data.X.resize(n, 2);
    data.X.col(0).setOnes();
    for (Index i = 0; i < n; ++i) data.X(i, 1) = rng.normal();
    data.y = Vector::Zero(n);
    return data;
}

void run_diagnostics(const RunConfig& config) {
    const DiagnosticsConfig& d = config.diag;
    auto wants = [&](const char* name) {
        return std::find(d.which.begin(), d.which.end(), name) != d.which.end();
    };

    if (wants("projection")) {
        std::ofstream out = open_out(config.out_dir, "projection.csv");
        out << "n,seed,tr_h,tr_h22_over_n,tr_u11,tr_b11,tr_c,tr_d\n";
        for (Index n : d.projection_sizes) {
            for (int s = 0; s < d.projection_seeds; ++s) {
                const SpatialDataset data = uniform_trend_dataset(
                    n, d.projection_dim, mix_seed(config.seed, static_cast<std::uint64_t>(s),
                                                  static_cast<std::uint64_t>(n)));
                PriorSpec prior = PriorSpec::standard(2, d.projection_delta2);
                const ProjectionDiag diag =
                    projection_diagnostics(data, prior, d.projection_kernel);
                out << n << "," << s << "," << format_double(diag.tr_h) << ","
                    << format_double(diag.tr_h22_over_n) << "," << format_double(diag.tr_u11)
                    << "," << format_double(diag.tr_b11) << "," << format_double(diag.tr_c)
                    << "," << format_double(diag.tr_d) << "\n";
            }
        }
    }

    if (wants("e2")) {
        // One expanding location sequence: each size is a prefix of the next.
        std::ofstream out = open_out(config.out_dir, "e2.csv");
        out << "n,q025,median,q975\n";
        Index n_max = 0;
        for (Index n : d.e2_sizes) n_max = std::max(n_max, n);
        Rng rng(mix_seed(config.seed, 0xe2));
        Matrix coords(n_max, d.e2_dim);
        for (Index i = 0; i < n_max; ++i)
            for (int j = 0; j < d.e2_dim; ++j) coords(i, j) = rng.uniform();
        for (Index n : d.e2_sizes) {
            const LocationSet chi(coords.topRows(n));
            const E2Diag diag = e2_profile(chi, d.e2_kernel, d.e2_delta2, d.e2_tau2);
            out << n << "," << format_double(diag.q025) << "," << format_double(diag.median)
                << "," << format_double(diag.q975) << "\n";
        }
    }

    if (wants("sigma2_trace")) {
        std::ofstream out = open_out(config.out_dir, "sigma2_trace.csv");
        out << "replicate,n,phi,posterior_mean\n";
        Index n_max = 0;
        for (Index n : d.sigma2_sizes) n_max = std::max(n_max, n);
        for (int rep = 0; rep < d.sigma2_replicates; ++rep) {
            SimConfig sim;
            sim.n = n_max;
            sim.n_holdout = 1;  // unused; generate() requires a split
            sim.dim = 1;
            sim.beta_true = Vector(0);
            sim.sigma2_true = d.sigma2_sigma2_true;
            sim.tau2_true = d.sigma2_tau2_true;
            sim.kernel_true = d.sigma2_kernel_true;
            sim.replicates = 1;
            sim.seed = mix_seed(config.seed, 0x516, static_cast<std::uint64_t>(rep));
            const SimReplicate data = generate(sim, 0);
            const auto trace = sigma2_posterior_trace(data.dataset, d.sigma2_nu, d.sigma2_phis,
                                                      d.sigma2_delta2, d.sigma2_sizes,
                                                      config.a_sigma, config.b_sigma);
            for (const auto& pt : trace)
                out << rep << "," << pt.n << "," << format_double(pt.phi) << ","
                    << format_double(pt.posterior_mean) << "\n";
        }
    }

    if (wants("blp")) {
        std::ofstream out = open_out(config.out_dir, "blp.csv");
        out << "half_width,error\n";
        for (Index n : d.blp_sizes)
            out << n << "," << format_double(blp_error_1d(n, d.blp_truth, d.blp_fitted)) << "\n";
    }
}

}  // namespace

int run(const RunConfig& config) {
    try {
        switch (config.mode) {
            case Mode::fit:
                run_fit(config);
                break;
            case Mode::simulate:
                run_simulate(config);
                break;
            case Mode::diagnostics:
                run_diagnostics(config);
                break;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "{\"error\": \"" << e.what() << "\"}\n";
        return 1;
    }
}

}  // namespace spstack::cli
