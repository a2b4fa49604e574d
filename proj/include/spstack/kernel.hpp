#pragma once

#include <memory>

#include "spstack/types.hpp"

namespace spstack {

/// Isotropic Matern correlation (phi d)^nu / (Gamma(nu) 2^{nu-1}) K_nu(phi d),
/// equal to 1 at d = 0.
double matern_corr(const MaternParams& params, double dist);

Matrix pairwise_distances(const LocationSet& chi);
Matrix cross_distances(const LocationSet& chi, const LocationSet& chi_new);

/// Elementwise Matern correlation of a distance matrix.
Matrix corr_from_distances(const MaternParams& params, const Matrix& dist);

/// n x n correlation matrix R(chi). Coincident points are rejected unless
/// chi.allow_duplicates is set.
Matrix build_corr_matrix(const MaternParams& params, const LocationSet& chi);

/// n x m cross-correlation J between observed locations and new points.
Matrix build_cross_corr(const MaternParams& params, const LocationSet& chi,
                        const LocationSet& chi_new);

/// Cholesky with the escalating-jitter policy: on failure add 1e-10 to the
/// diagonal, escalate tenfold up to 1e-6, then give up. Returns the lower
/// factor; `jitter` reports what was added (0 for a clean factorization).
Matrix cholesky_with_jitter(Matrix a, double& jitter);

/// Factored correlation matrix for one (phi, nu) on a fixed location set;
/// immutable and shared across delta2 values and threads.
struct CorrFactor {
    MaternParams params;
    LocationSet chi;
    Matrix L;     // lower Cholesky factor of R (after jitter)
    Matrix Rinv;  // explicit inverse, needed by the block system and J^T R^{-1}
    double jitter = 0.0;

    static std::shared_ptr<const CorrFactor> make(const MaternParams& params,
                                                  const LocationSet& chi);
    /// Same, but with R already assembled (e.g. sliced out of a larger matrix).
    static std::shared_ptr<const CorrFactor> from_corr(const MaternParams& params,
                                                       const LocationSet& chi, Matrix corr);

    Index n() const { return chi.n(); }
};

}  // namespace spstack
