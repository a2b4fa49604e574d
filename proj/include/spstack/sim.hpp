#pragma once

#include <cstdint>
#include <string>

#include "spstack/predict.hpp"

namespace spstack {

struct SimConfig {
    Index n = 200;
    Index n_holdout = 50;
    int dim = 2;  // 1 or 2
    Vector beta_true;
    double sigma2_true = 1.0;
    double tau2_true = 1.0;
    MaternParams kernel_true{7.0, 1.0};
    int replicates = 30;
    std::uint64_t seed = 1;

    void validate() const {
        kernel_true.validate();
        if (dim != 1 && dim != 2) throw std::invalid_argument("SimConfig: dim must be 1 or 2");
        if (n < 2 || n_holdout < 1 || n_holdout >= n)
            throw std::invalid_argument("SimConfig: need 1 <= n_holdout < n");
        if (!(sigma2_true > 0.0) || !(tau2_true > 0.0))
            throw std::invalid_argument("SimConfig: variances must be positive");
        if (replicates < 1) throw std::invalid_argument("SimConfig: replicates must be >= 1");
    }
};

/// One synthetic draw of y = X beta + z + eps on uniform locations in
/// [0,1]^dim, with the latent field recorded and a random holdout subset.
struct SimReplicate {
    SpatialDataset dataset;  // all n rows
    Vector z_true;           // all n latent values
    std::vector<Index> training;
    std::vector<Index> holdout;

    SpatialDataset training_data() const { return dataset.subset(training); }
    SpatialDataset holdout_data() const { return dataset.subset(holdout); }
};

SimReplicate generate(const SimConfig& config, int replicate_index);

struct StudyMethodResult {
    std::string method;  // "stack-means", "stack-densities", "oracle"
    MetricReport metrics;
    Index nonzero_weights = 0;
    double objective = 0.0;
    bool converged = true;
};

struct StudyReplicateResult {
    int replicate = 0;
    std::vector<StudyMethodResult> methods;
};

struct StudyResult {
    std::vector<StudyReplicateResult> rows;

    std::vector<double> metric_values(const std::string& method, const std::string& which) const;
    double median_metric(const std::string& method, const std::string& which) const;
    double mean_nonzero_weights(const std::string& method) const;
};

double median(std::vector<double> values);

/// Full replication loop: per replicate, solve both stacking weight problems
/// by K-fold cross-validation, refit every candidate on the training data,
/// score the two stacked predictors and the fixed-truth single model
/// ("oracle", hyper-parameters at the generating values) on the holdout, and
/// score latent recovery over all n sampled locations.
StudyResult run_study(const SimConfig& config, const CandidateGrid& grid,
                      const PriorSpec& prior_base, int K, int threads = 1);

}  // namespace spstack
