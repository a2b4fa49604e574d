#pragma once

#include <vector>

#include "spstack/types.hpp"
#include "spstack/kernel.hpp"

namespace spstack {

/// Trace summaries of the hat matrix of the standardized augmented regression
/// and of the precision-sandwich matrices that govern trend recovery. Dense
/// O((2n+p)^3) instrumentation, capped at n <= 1000.
struct ProjectionDiag {
    Index n = 0;
    double tr_h = 0.0;           // trace of the full projector (= n + p)
    double tr_h22_over_n = 0.0;  // lower-right n x n block trace / n
    double tr_u11 = 0.0;
    double tr_b11 = 0.0;
    double tr_c = 0.0;
    double tr_d = 0.0;
};

ProjectionDiag projection_diagnostics(const SpatialDataset& data, const PriorSpec& prior,
                                      const MaternParams& kernel);

/// Per-location posterior-variance error term for latent interpolation: each
/// location in turn is treated as the prediction point with the rest as data,
///   E2(s) = (tau2/delta2) [1 + J^T {(I + delta2^{-1} R)^{-1} - I} R^{-1} J].
struct E2Diag {
    Vector values;
    double q025 = 0.0;
    double median = 0.0;
    double q975 = 0.0;
};

E2Diag e2_profile(const LocationSet& chi, const MaternParams& kernel, double delta2 = 1.0,
                  double tau2 = 1.0);

/// Posterior mean of sigma2 under the no-trend conjugate model fitted to the
/// first n observations, for each requested n and each fitting phi. The trend
/// settles near tau2_true/delta2 whatever phi is used.
struct Sigma2TracePoint {
    Index n = 0;
    double phi = 0.0;
    double posterior_mean = 0.0;
};

std::vector<Sigma2TracePoint> sigma2_posterior_trace(const SpatialDataset& data, double nu,
                                                     const std::vector<double>& phi_grid,
                                                     double delta2,
                                                     const std::vector<Index>& n_values,
                                                     double a_sigma = 2.0, double b_sigma = 2.0);

/// Expected squared error of the (possibly misspecified) best linear predictor
/// of z(0) from noisy observations on the 1-D grid {i/n, -n <= i <= n, i != 0}.
struct BlpTruth {
    MaternParams kernel;
    double sigma2 = 1.0;
    double tau2 = 0.0;
};

struct BlpFitted {
    MaternParams kernel;
    double delta2 = 1.0;
};

double blp_error_1d(Index half_width, const BlpTruth& truth, const BlpFitted& fitted);

}  // namespace spstack
