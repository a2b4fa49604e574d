#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spstack/types.hpp"

namespace spstack {

struct Candidate {
    double phi;
    double nu;
    double delta2;
};

/// Cartesian candidate grid G_phi x G_nu x G_delta2, ordered with phi
/// outermost and delta2 innermost.
struct CandidateGrid {
    std::vector<double> phi;
    std::vector<double> nu;
    std::vector<double> delta2;
    std::vector<Candidate> candidates;

    static CandidateGrid cartesian(std::vector<double> phis, std::vector<double> nus,
                                   std::vector<double> delta2s);
    static CandidateGrid single(const Candidate& c) {
        return cartesian({c.phi}, {c.nu}, {c.delta2});
    }

    Index size() const { return static_cast<Index>(candidates.size()); }
};

/// Random K-fold partition of n observation indices; deterministic in seed and
/// near-equal in size (every fold non-empty).
struct FoldAssignment {
    int K = 0;
    std::vector<int> fold_of;  // n entries in [0, K)
    std::uint64_t seed = 0;

    std::vector<std::vector<Index>> fold_indices() const;
    std::vector<std::vector<Index>> complement_indices() const;
};

FoldAssignment assign_folds(Index n, int K, std::uint64_t seed);

/// Out-of-fold predictive summaries: entry (i, g) is computed from a fit that
/// excludes observation i's fold.
struct CvTable {
    Matrix yhat;  // n x G expected outcome
    Matrix zhat;  // n x G expected latent process
    Matrix lp;    // n x G log point-wise predictive density
};

struct CvOptions {
    int threads = 1;
    bool monte_carlo_lppd = false;  // estimate lp by posterior sampling instead of closed form
    Index mc_draws = 2000;
    std::uint64_t mc_seed = 0;
};

CvTable build_cv_table(const SpatialDataset& data, const PriorSpec& prior_base,
                       const CandidateGrid& grid, const FoldAssignment& folds,
                       const CvOptions& options = {});

enum class WeightSolver { means, densities };

struct StackingWeights {
    Vector w;
    double objective = 0.0;
    WeightSolver solver = WeightSolver::means;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_trace;  // objective after each iterate

    Index nonzero_count(double threshold = 1e-3) const {
        return (w.array() > threshold).count();
    }
};

/// Stacking of means: minimize ||y - Yhat w||^2 over the simplex (sum-to-one
/// always; w >= 0 unless nonneg is off). Dense primal active-set QP.
StackingWeights solve_weights_means(const Vector& y, const Matrix& yhat, bool nonneg = true);

/// Stacking of predictive densities: maximize (1/n) sum_i log(sum_g w_g
/// exp(lp_ig)) over the probability simplex by the monotone multiplicative
/// (mixture EM) update, with a damped fallback.
StackingWeights solve_weights_densities(const Matrix& lp);

}  // namespace spstack
