#include "spstack/predict.hpp"

#include <cmath>
#include <stdexcept>

#include "spstack/parallel.hpp"

namespace spstack {

std::vector<ConjugateFit> fit_all_candidates(const SpatialDataset& data,
                                             const PriorSpec& prior_base,
                                             const CandidateGrid& grid, int threads) {
    data.validate();
    const Index n_pairs = static_cast<Index>(grid.phi.size() * grid.nu.size());
    const Index n_d2 = static_cast<Index>(grid.delta2.size());
    std::vector<ConjugateFit> fits(static_cast<size_t>(grid.size()));

    parallel_for(n_pairs, threads, [&](Index pair) {
        const MaternParams params{grid.phi[static_cast<size_t>(pair) / grid.nu.size()],
                                  grid.nu[static_cast<size_t>(pair) % grid.nu.size()]};
        auto corr = CorrFactor::make(params, data.chi);
        for (Index id2 = 0; id2 < n_d2; ++id2) {
            PriorSpec prior = prior_base;
            prior.delta2 = grid.delta2[static_cast<size_t>(id2)];
            fits[static_cast<size_t>(pair * n_d2 + id2)] = fit(data, prior, corr);
        }
    });
    return fits;
}

Vector stacked_mean(const StackedModel& model, const LocationSet& chi_new, const Matrix& X_new) {
    model.validate();
    Vector out = Vector::Zero(chi_new.n());
    for (Index g = 0; g < model.grid.size(); ++g) {
        const double wg = model.weights.w(g);
        if (wg == 0.0) continue;
        out += wg * predict((*model.fits)[static_cast<size_t>(g)], chi_new, X_new).location;
    }
    return out;
}

Vector stacked_latent_mean(const StackedModel& model, const LocationSet& chi_new) {
    model.validate();
    Vector out = Vector::Zero(chi_new.n());
    for (Index g = 0; g < model.grid.size(); ++g) {
        const double wg = model.weights.w(g);
        if (wg == 0.0) continue;
        const ConjugateFit& f = (*model.fits)[static_cast<size_t>(g)];
        const Matrix j = build_cross_corr(f.corr->params, f.corr->chi, chi_new);
        out += wg * (j.transpose() * (f.corr->Rinv * f.z_hat()));
    }
    return out;
}

double stacked_log_density(const StackedModel& model, const Vector& point, const Vector& x_new,
                           double y_new) {
    model.validate();
    double max_lp = -std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, double>> terms;  // (weight, lppd)
    for (Index g = 0; g < model.grid.size(); ++g) {
        const double wg = model.weights.w(g);
        if (wg == 0.0) continue;
        const double lp = lppd((*model.fits)[static_cast<size_t>(g)], point, x_new, y_new);
        terms.emplace_back(wg, lp);
        if (lp > max_lp) max_lp = lp;
    }
    double acc = 0.0;
    for (const auto& [wg, lp] : terms) acc += wg * std::exp(lp - max_lp);
    return max_lp + std::log(acc);
}

MetricReport evaluate(const StackedModel& model, const SpatialDataset& holdout,
                      const LocationSet* z_locations, const Vector* z_true) {
    model.validate();
    holdout.validate();
    if ((z_locations == nullptr) != (z_true == nullptr))
        throw std::invalid_argument("evaluate: latent truth needs both locations and values");
    const Index nh = holdout.n();
    if (nh < 1) throw std::invalid_argument("evaluate: empty holdout");

    // One batched prediction per active candidate covers MSPE and MLPD.
    Vector mean = Vector::Zero(nh);
    std::vector<std::pair<double, PredictiveT>> active;
    for (Index g = 0; g < model.grid.size(); ++g) {
        const double wg = model.weights.w(g);
        if (wg == 0.0) continue;
        PredictiveT pred = predict((*model.fits)[static_cast<size_t>(g)], holdout.chi, holdout.X);
        mean += wg * pred.location;
        active.emplace_back(wg, std::move(pred));
    }

    MetricReport report;
    report.per_point.resize(nh, 3);
    double sum_sq = 0.0, sum_lp = 0.0;
    for (Index i = 0; i < nh; ++i) {
        const double err = mean(i) - holdout.y(i);
        sum_sq += err * err;

        double max_lp = -std::numeric_limits<double>::infinity();
        std::vector<double> lps(active.size());
        for (size_t a = 0; a < active.size(); ++a) {
            const auto& pred = active[a].second;
            lps[a] = log_predictive_density(pred.a_star, pred.b_star, pred.point_scale(i),
                                            pred.location(i), holdout.y(i));
            if (lps[a] > max_lp) max_lp = lps[a];
        }
        double acc = 0.0;
        for (size_t a = 0; a < active.size(); ++a)
            acc += active[a].first * std::exp(lps[a] - max_lp);
        const double lp_mix = max_lp + std::log(acc);
        sum_lp += lp_mix;
        report.per_point(i, 0) = mean(i);
        report.per_point(i, 1) = lp_mix;
        report.per_point(i, 2) = err * err;
    }
    report.mspe = sum_sq / static_cast<double>(nh);
    report.mlpd = sum_lp / static_cast<double>(nh);

    if (z_locations != nullptr) {
        if (z_true->size() != z_locations->n())
            throw std::invalid_argument("evaluate: latent truth size mismatch");
        const Vector zhat = stacked_latent_mean(model, *z_locations);
        report.msez = (zhat - *z_true).squaredNorm() / static_cast<double>(z_true->size());
    }
    return report;
}

}  // namespace spstack
