#pragma once

#include <memory>
#include <optional>

#include "spstack/conjugate.hpp"
#include "spstack/stacking.hpp"

namespace spstack {

/// Candidate fits on the full dataset (cross-validation fits exist only to
/// solve the weights), indexed like the grid.
std::vector<ConjugateFit> fit_all_candidates(const SpatialDataset& data,
                                             const PriorSpec& prior_base,
                                             const CandidateGrid& grid, int threads = 1);

struct StackedModel {
    CandidateGrid grid;
    StackingWeights weights;
    std::shared_ptr<const std::vector<ConjugateFit>> fits;

    void validate() const {
        if (!fits || static_cast<Index>(fits->size()) != grid.size() ||
            weights.w.size() != grid.size())
            throw std::invalid_argument("StackedModel: fits, grid and weights disagree");
    }
};

/// Weighted average of the candidate posterior predictive means.
Vector stacked_mean(const StackedModel& model, const LocationSet& chi_new, const Matrix& X_new);

/// Weighted average of the candidate latent means E(z~ | y).
Vector stacked_latent_mean(const StackedModel& model, const LocationSet& chi_new);

/// log sum_g w_g exp(lppd_g), max-shifted.
double stacked_log_density(const StackedModel& model, const Vector& point, const Vector& x_new,
                           double y_new);

struct MetricReport {
    double mspe = std::numeric_limits<double>::quiet_NaN();
    double msez = std::numeric_limits<double>::quiet_NaN();
    double mlpd = std::numeric_limits<double>::quiet_NaN();
    Matrix per_point;  // holdout rows x {mean, lppd, squared error}
};

/// MSPE and MLPD on the holdout; MSEZ over the caller-supplied latent truth
/// locations (typically every sampled location) when provided.
MetricReport evaluate(const StackedModel& model, const SpatialDataset& holdout,
                      const LocationSet* z_locations = nullptr, const Vector* z_true = nullptr);

}  // namespace spstack
