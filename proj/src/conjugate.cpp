#include "spstack/conjugate.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "spstack/rng.hpp"

namespace spstack {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112353;

Matrix prior_precision(const PriorSpec& prior) {
    const Index p = prior.p();
    if (p == 0) return Matrix(0, 0);
    Eigen::LLT<Matrix> llt(prior.V_beta);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("fit: V_beta is not positive definite");
    return llt.solve(Matrix::Identity(p, p));
}

}  // namespace

ConjugateFit fit(const SpatialDataset& data, const PriorSpec& prior, const MaternParams& kernel) {
    return fit(data, prior, CorrFactor::make(kernel, data.chi));
}

ConjugateFit fit(const SpatialDataset& data, const PriorSpec& prior,
                 std::shared_ptr<const CorrFactor> corr) {
    data.validate();
    prior.validate();
    const Index n = data.n();
    const Index p = data.p();
    if (prior.p() != p) throw std::invalid_argument("fit: prior dimension does not match X");
    if (!corr || corr->n() != n)
        throw std::invalid_argument("fit: correlation factor does not match the dataset");

    const double d2inv = 1.0 / prior.delta2;
    const Matrix vb_inv = prior_precision(prior);

    // M^{-1} = [ d2inv X^T X + V_b^{-1}   d2inv X^T          ]
    //          [ d2inv X                  R^{-1} + d2inv I_n ]
    Matrix minv(p + n, p + n);
    if (p > 0) {
        minv.topLeftCorner(p, p) = d2inv * (data.X.transpose() * data.X) + vb_inv;
        minv.topRightCorner(p, n) = d2inv * data.X.transpose();
        minv.bottomLeftCorner(n, p) = minv.topRightCorner(p, n).transpose();
    }
    minv.bottomRightCorner(n, n) = corr->Rinv;
    minv.bottomRightCorner(n, n).diagonal().array() += d2inv;

    Vector m_star(p + n);
    if (p > 0) m_star.head(p) = vb_inv * prior.mu_beta + d2inv * (data.X.transpose() * data.y);
    m_star.tail(n) = d2inv * data.y;

    ConjugateFit out;
    out.L = cholesky_with_jitter(std::move(minv), out.block_jitter);
    const Vector u = out.L.triangularView<Eigen::Lower>().solve(m_star);

    double prior_quad = 0.0;
    if (p > 0) prior_quad = prior.mu_beta.dot(vb_inv * prior.mu_beta);
    out.a_star = prior.a_sigma + 0.5 * static_cast<double>(n);
    out.b_star = prior.b_sigma +
                 0.5 * (d2inv * data.y.squaredNorm() + prior_quad - u.squaredNorm());
    out.gamma_hat = out.L.transpose().triangularView<Eigen::Upper>().solve(u);
    out.corr = std::move(corr);
    out.delta2 = prior.delta2;
    out.n = n;
    out.p = p;
    if (!std::isfinite(out.b_star) || !out.gamma_hat.allFinite())
        throw std::runtime_error("fit: non-finite posterior state");
    return out;
}

Sigma2Moments posterior_sigma2(const ConjugateFit& fit) {
    if (!(fit.a_star > 2.0))
        throw std::domain_error("posterior_sigma2: variance requires a_star > 2");
    const double am1 = fit.a_star - 1.0;
    return {fit.b_star / am1, fit.b_star * fit.b_star / (am1 * am1 * (fit.a_star - 2.0))};
}

PosteriorDraws sample_posterior(const ConjugateFit& fit, Index count, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample_posterior: count must be >= 1");
    const Index dim = fit.p + fit.n;
    Rng rng(seed);
    PosteriorDraws draws;
    draws.sigma2.resize(count);
    draws.gamma.resize(count, dim);
    Vector v(dim);
    for (Index j = 0; j < count; ++j) {
        const double s2 = fit.b_star / rng.gamma(fit.a_star);
        draws.sigma2(j) = s2;
        const double sd = std::sqrt(s2);
        for (Index i = 0; i < dim; ++i) v(i) = sd * rng.normal();
        draws.gamma.row(j) =
            (fit.gamma_hat + fit.L.transpose().triangularView<Eigen::Upper>().solve(v))
                .transpose();
    }
    return draws;
}

PredictiveT predict_given_cross(const ConjugateFit& fit, const Matrix& J, const Matrix& X_new) {
    if (J.rows() != fit.n || X_new.cols() != fit.p || X_new.rows() != J.cols())
        throw std::invalid_argument("predict: dimension mismatch");
    const Index m = J.cols();

    PredictiveT out;
    out.dof = fit.dof();
    out.a_star = fit.a_star;
    out.b_star = fit.b_star;

    const Matrix A = J.transpose() * fit.corr->Rinv;  // J^T R^{-1}, m x n
    out.latent_mean = A * fit.z_hat();
    out.location = out.latent_mean;
    if (fit.p > 0) out.location += X_new * fit.beta_hat();

    // h_s = [x(s)^T, (J^T R^{-1})_s]; V_s = ||L^{-1} h_s^T||^2 + delta2
    Matrix h(m, fit.p + fit.n);
    if (fit.p > 0) h.leftCols(fit.p) = X_new;
    h.rightCols(fit.n) = A;
    const Matrix w = fit.L.triangularView<Eigen::Lower>().solve(h.transpose());
    out.point_scale = w.colwise().squaredNorm().transpose();
    out.point_scale.array() += fit.delta2;
    return out;
}

PredictiveT predict(const ConjugateFit& fit, const LocationSet& chi_new, const Matrix& X_new,
                    bool with_joint_scale) {
    if (chi_new.n() < 1) throw std::invalid_argument("predict: empty prediction set");
    const Matrix J = build_cross_corr(fit.corr->params, fit.corr->chi, chi_new);
    PredictiveT out = predict_given_cross(fit, J, X_new);
    if (!with_joint_scale) return out;

    // Joint (z~, y~) scale from the conditional-Gaussian composition:
    //   z~ | gamma ~ N(J^T R^{-1} z, sigma2 (R(chi~) - J^T R^{-1} J)),
    //   y~ = X~ beta + z~ + noise, noise ~ N(0, sigma2 delta2 I).
    const Index m = chi_new.n();
    const Matrix A = J.transpose() * fit.corr->Rinv;
    Matrix m1 = corr_from_distances(fit.corr->params, pairwise_distances(chi_new)) - A * J;
    Matrix w_map(2 * m, fit.p + fit.n);
    w_map.setZero();
    w_map.topRightCorner(m, fit.n) = A;
    if (fit.p > 0) w_map.bottomLeftCorner(m, fit.p) = X_new;
    w_map.bottomRightCorner(m, fit.n) = A;
    const Matrix t = fit.L.triangularView<Eigen::Lower>().solve(w_map.transpose());
    Matrix scale = t.transpose() * t;
    scale.topLeftCorner(m, m) += m1;
    scale.topRightCorner(m, m) += m1;
    scale.bottomLeftCorner(m, m) += m1;
    scale.bottomRightCorner(m, m) += m1;
    scale.bottomRightCorner(m, m).diagonal().array() += fit.delta2;
    out.joint_scale = std::move(scale);
    return out;
}

double log_predictive_density(double a_star, double b_star, double vs, double mu, double y) {
    const double r = y - mu;
    return -0.5 * (kLog2Pi + std::log(vs)) + a_star * std::log(b_star) -
           (a_star + 0.5) * std::log(b_star + r * r / (2.0 * vs)) +
           std::lgamma(a_star + 0.5) - std::lgamma(a_star);
}

double lppd(const ConjugateFit& fit, const Vector& point, const Vector& x_new, double y_new) {
    if (x_new.size() != fit.p) throw std::invalid_argument("lppd: x_new has wrong length");
    LocationSet chi_new;
    chi_new.coords = point.transpose();
    chi_new.allow_duplicates = true;
    Matrix xrow(1, fit.p);
    if (fit.p > 0) xrow.row(0) = x_new.transpose();
    const Matrix J = build_cross_corr(fit.corr->params, fit.corr->chi, chi_new);
    const PredictiveT pred = predict_given_cross(fit, J, xrow);
    return log_predictive_density(fit.a_star, fit.b_star, pred.point_scale(0), pred.location(0),
                                  y_new);
}

double lppd_monte_carlo(const ConjugateFit& fit, const Vector& point, const Vector& x_new,
                        double y_new, Index draws, std::uint64_t seed) {
    if (draws < 1) throw std::invalid_argument("lppd_monte_carlo: draws must be >= 1");
    if (x_new.size() != fit.p) throw std::invalid_argument("lppd_monte_carlo: x_new wrong length");
    LocationSet chi_new;
    chi_new.coords = point.transpose();
    chi_new.allow_duplicates = true;
    const Matrix J = build_cross_corr(fit.corr->params, fit.corr->chi, chi_new);
    const Vector a = (J.transpose() * fit.corr->Rinv).transpose();  // R^{-1} J, length n

    Rng rng(seed);
    const Index dim = fit.p + fit.n;
    Vector v(dim), gamma(dim);
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> logs(static_cast<size_t>(draws));
    for (Index j = 0; j < draws; ++j) {
        const double s2 = fit.b_star / rng.gamma(fit.a_star);
        const double sd = std::sqrt(s2);
        for (Index i = 0; i < dim; ++i) v(i) = sd * rng.normal();
        gamma = fit.gamma_hat + fit.L.transpose().triangularView<Eigen::Upper>().solve(v);
        double yhat = a.dot(gamma.tail(fit.n));
        if (fit.p > 0) yhat += x_new.dot(gamma.head(fit.p));
        const double var = fit.delta2 * s2;
        const double r = y_new - yhat;
        const double lg = -0.5 * (kLog2Pi + std::log(var)) - r * r / (2.0 * var);
        logs[static_cast<size_t>(j)] = lg;
        if (lg > max_log) max_log = lg;
    }
    double acc = 0.0;
    for (double lg : logs) acc += std::exp(lg - max_log);
    return max_log + std::log(acc / static_cast<double>(draws));
}

}  // namespace spstack
