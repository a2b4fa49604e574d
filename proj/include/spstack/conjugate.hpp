#pragma once

#include <cstdint>
#include <memory>

#include "spstack/kernel.hpp"
#include "spstack/types.hpp"

namespace spstack {

/// Exact posterior state of the conjugate spatial regression with fixed
/// (phi, nu, delta2):
///   sigma2 | y ~ IG(a_star, b_star),
///   gamma = (beta, z) | sigma2, y ~ N(gamma_hat, sigma2 M),
/// where M^{-1} = L L^T is held through its lower Cholesky factor.
struct ConjugateFit {
    double a_star = 0.0;
    double b_star = 0.0;
    Vector gamma_hat;  // beta-hat (p) then z-hat (n)
    Matrix L;          // lower Cholesky factor of M^{-1}, (p+n) x (p+n)
    std::shared_ptr<const CorrFactor> corr;
    double delta2 = 1.0;
    Index n = 0;
    Index p = 0;
    double block_jitter = 0.0;  // jitter needed on M^{-1}, normally 0

    auto beta_hat() const { return gamma_hat.head(p); }
    auto z_hat() const { return gamma_hat.tail(n); }
    double dof() const { return 2.0 * a_star; }
};

/// One-shot fit: builds and factors R(chi) internally. The kernel's delta2
/// companion rides along in prior.delta2.
ConjugateFit fit(const SpatialDataset& data, const PriorSpec& prior, const MaternParams& kernel);

/// Fit sharing a prebuilt correlation factor (hoisted out of the delta2 loop).
ConjugateFit fit(const SpatialDataset& data, const PriorSpec& prior,
                 std::shared_ptr<const CorrFactor> corr);

struct Sigma2Moments {
    double mean;
    double variance;
};

/// IG(a_star, b_star) mean and variance; requires a_star > 2.
Sigma2Moments posterior_sigma2(const ConjugateFit& fit);

struct PosteriorDraws {
    Vector sigma2;  // count
    Matrix gamma;   // count x (p+n)
};

/// Exact joint draws: sigma2 ~ IG(a*, b*), then gamma = gamma_hat + L^{-T} v
/// with v ~ N(0, sigma2 I). Deterministic given the seed.
PosteriorDraws sample_posterior(const ConjugateFit& fit, Index count, std::uint64_t seed);

/// Posterior predictive law at m new points: a Student-t with dof = 2 a*,
/// the stated location, and per-point scale^2 (b*/a*) * point_scale where
/// point_scale = h M h^T + delta2 folds the regression-coefficient and
/// latent-interpolation uncertainty into the nugget-noise density (the same
/// conditional density the Monte-Carlo routine averages). joint_scale, filled
/// on request, is the full 2m x 2m (z~, y~) scale including the latent
/// conditional covariance.
struct PredictiveT {
    double dof = 0.0;
    Vector location;     // E(y~ | y)
    Vector latent_mean;  // E(z~ | y)
    Vector point_scale;  // V_s per point
    double a_star = 0.0;
    double b_star = 0.0;
    Matrix joint_scale;  // empty unless requested
};

PredictiveT predict(const ConjugateFit& fit, const LocationSet& chi_new, const Matrix& X_new,
                    bool with_joint_scale = false);

/// Prediction from a precomputed cross-correlation J (n x m), as in the
/// cross-validation loop where J is sliced from a full-sample matrix.
PredictiveT predict_given_cross(const ConjugateFit& fit, const Matrix& J, const Matrix& X_new);

/// Closed-form log predictive density of a scale-mixture
/// integral N(y | mu, sigma2 vs) IG(sigma2 | a, b) dsigma2.
double log_predictive_density(double a_star, double b_star, double vs, double mu, double y);

/// Closed-form log point-wise predictive density of y_new at one location.
double lppd(const ConjugateFit& fit, const Vector& point, const Vector& x_new, double y_new);

/// Monte-Carlo estimate of the same quantity from `draws` posterior samples:
/// log of the average conditional density N(y | yhat^(j), delta2 sigma2^(j)).
double lppd_monte_carlo(const ConjugateFit& fit, const Vector& point, const Vector& x_new,
                        double y_new, Index draws, std::uint64_t seed);

}  // namespace spstack
