#include "spstack/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spstack/parallel.hpp"
#include "spstack/rng.hpp"

namespace spstack {

SimReplicate generate(const SimConfig& config, int replicate_index) {
    config.validate();
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(replicate_index)));
    const Index n = config.n;
    const Index p = config.beta_true.size();

    SimReplicate rep;
    // Draw order is fixed: locations, covariates, latent field, noise, holdout.
    Matrix coords(n, config.dim);
    for (Index i = 0; i < n; ++i)
        for (int d = 0; d < config.dim; ++d) coords(i, d) = rng.uniform();
    rep.dataset.chi = LocationSet(std::move(coords));

    rep.dataset.X.resize(n, p);
    if (p > 0) {
        rep.dataset.X.col(0).setOnes();
        for (Index j = 1; j < p; ++j)
            for (Index i = 0; i < n; ++i) rep.dataset.X(i, j) = rng.normal();
    }

    double jitter = 0.0;
    const Matrix l = cholesky_with_jitter(
        build_corr_matrix(config.kernel_true, rep.dataset.chi), jitter);
    Vector xi(n);
    for (Index i = 0; i < n; ++i) xi(i) = rng.normal();
    rep.z_true = std::sqrt(config.sigma2_true) * (l * xi);

    rep.dataset.y = rep.z_true;
    if (p > 0) rep.dataset.y += rep.dataset.X * config.beta_true;
    const double tau = std::sqrt(config.tau2_true);
    for (Index i = 0; i < n; ++i) rep.dataset.y(i) += tau * rng.normal();

    std::vector<Index> order(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    rng.shuffle(order);
    rep.holdout.assign(order.begin(), order.begin() + config.n_holdout);
    rep.training.assign(order.begin() + config.n_holdout, order.end());
    std::sort(rep.holdout.begin(), rep.holdout.end());
    std::sort(rep.training.begin(), rep.training.end());
    return rep;
}

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<double> StudyResult::metric_values(const std::string& method,
                                               const std::string& which) const {
    std::vector<double> out;
    for (const auto& row : rows) {
        for (const auto& m : row.methods) {
            if (m.method != method) continue;
            if (which == "mspe")
                out.push_back(m.metrics.mspe);
            else if (which == "msez")
                out.push_back(m.metrics.msez);
            else if (which == "mlpd")
                out.push_back(m.metrics.mlpd);
            else
                throw std::invalid_argument("StudyResult: unknown metric " + which);
        }
    }
    return out;
}

double StudyResult::median_metric(const std::string& method, const std::string& which) const {
    return median(metric_values(method, which));
}

double StudyResult::mean_nonzero_weights(const std::string& method) const {
    double total = 0.0;
    Index count = 0;
    for (const auto& row : rows)
        for (const auto& m : row.methods)
            if (m.method == method) {
                total += static_cast<double>(m.nonzero_weights);
                ++count;
            }
    return count > 0 ? total / static_cast<double>(count) : 0.0;
}

StudyResult run_study(const SimConfig& config, const CandidateGrid& grid,
                      const PriorSpec& prior_base, int K, int threads) {
    config.validate();
    if (prior_base.p() != config.beta_true.size())
        throw std::invalid_argument("run_study: prior dimension does not match beta_true");

    StudyResult result;
    result.rows.resize(static_cast<size_t>(config.replicates));

    parallel_for(config.replicates, threads, [&](Index r) {
        try {
            const SimReplicate rep = generate(config, static_cast<int>(r));
            const SpatialDataset train = rep.training_data();
            const SpatialDataset hold = rep.holdout_data();

            const FoldAssignment folds = assign_folds(
                train.n(), K, mix_seed(config.seed, static_cast<std::uint64_t>(r), 0xf01d));
            const CvTable cv = build_cv_table(train, prior_base, grid, folds);
            const StackingWeights w_means = solve_weights_means(train.y, cv.yhat);
            const StackingWeights w_dens = solve_weights_densities(cv.lp);

            auto fits = std::make_shared<const std::vector<ConjugateFit>>(
                fit_all_candidates(train, prior_base, grid));

            StudyReplicateResult row;
            row.replicate = static_cast<int>(r);
            const std::pair<const char*, const StackingWeights*> solvers[] = {
                {"stack-means", &w_means}, {"stack-densities", &w_dens}};
            for (const auto& [name, weights] : solvers) {
                StackedModel model{grid, *weights, fits};
                StudyMethodResult mr;
                mr.method = name;
                mr.metrics = evaluate(model, hold, &rep.dataset.chi, &rep.z_true);
                mr.nonzero_weights = weights->nonzero_count();
                mr.objective = weights->objective;
                mr.converged = weights->converged;
                row.methods.push_back(std::move(mr));
            }

            // Single conjugate model at the generating hyper-parameters.
            const CandidateGrid oracle_grid = CandidateGrid::single(
                {config.kernel_true.phi, config.kernel_true.nu,
                 config.tau2_true / config.sigma2_true});
            auto oracle_fits = std::make_shared<const std::vector<ConjugateFit>>(
                fit_all_candidates(train, prior_base, oracle_grid));
            StackingWeights unit;
            unit.w = Vector::Ones(1);
            unit.converged = true;
            StackedModel oracle{oracle_grid, unit, oracle_fits};
            StudyMethodResult mr;
            mr.method = "oracle";
            mr.metrics = evaluate(oracle, hold, &rep.dataset.chi, &rep.z_true);
            mr.nonzero_weights = 1;
            row.methods.push_back(std::move(mr));

            result.rows[static_cast<size_t>(r)] = std::move(row);
        } catch (const std::exception& e) {
            throw std::runtime_error("run_study: replicate " + std::to_string(r) + ": " +
                                     e.what());
        }
    });
    return result;
}

}  // namespace spstack
