#include "spstack/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spstack/conjugate.hpp"

namespace spstack {

namespace {

double quantile(std::vector<double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = static_cast<size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return (1.0 - frac) * sorted[lo] + frac * sorted[hi];
}

}  // namespace

ProjectionDiag projection_diagnostics(const SpatialDataset& data, const PriorSpec& prior,
                                      const MaternParams& kernel) {
    data.validate();
    prior.validate();
    const Index n = data.n();
    const Index p = data.p();
    if (n > 1000) throw std::invalid_argument("projection_diagnostics: n capped at 1000");
    if (prior.p() != p)
        throw std::invalid_argument("projection_diagnostics: prior dimension mismatch");

    const double dinv = 1.0 / std::sqrt(prior.delta2);
    auto corr = CorrFactor::make(kernel, data.chi);

    // Standardized design: rows [X/delta, I/delta; L_b^{-1}, 0; 0, L_phi],
    // with V_b = L_b L_b^T and L_phi = L_R^{-1} so that L_phi^T L_phi = R^{-1}.
    Matrix xdag = Matrix::Zero(2 * n + p, p + n);
    xdag.topLeftCorner(n, p) = dinv * data.X;
    xdag.block(0, p, n, n) = dinv * Matrix::Identity(n, n);
    Matrix vb_inv;
    if (p > 0) {
        Eigen::LLT<Matrix> vb_llt(prior.V_beta);
        if (vb_llt.info() != Eigen::Success)
            throw std::invalid_argument("projection_diagnostics: V_beta not positive definite");
        const Matrix lb = vb_llt.matrixL();
        xdag.block(n, 0, p, p) =
            lb.triangularView<Eigen::Lower>().solve(Matrix::Identity(p, p));
        vb_inv = vb_llt.solve(Matrix::Identity(p, p));
    }
    xdag.bottomRightCorner(n, n) =
        corr->L.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));

    const Matrix gram = xdag.transpose() * xdag;  // (p+n) x (p+n)
    Eigen::LLT<Matrix> gram_llt(gram);
    if (gram_llt.info() != Eigen::Success)
        throw std::runtime_error("projection_diagnostics: rank-deficient design");
    const Matrix u = gram_llt.solve(Matrix::Identity(p + n, p + n));
    const Matrix h = xdag * gram_llt.solve(xdag.transpose());

    ProjectionDiag diag;
    diag.n = n;
    diag.tr_h = h.trace();
    diag.tr_h22_over_n =
        h.bottomRightCorner(n, n).trace() / static_cast<double>(n);

    Matrix inner(p + n, p + n);  // [X I]^T [X I]
    inner.topLeftCorner(p, p) = data.X.transpose() * data.X;
    inner.topRightCorner(p, n) = data.X.transpose();
    inner.bottomLeftCorner(n, p) = data.X;
    inner.bottomRightCorner(n, n) = Matrix::Identity(n, n);
    const Matrix b = u * inner * u;
    diag.tr_b11 = b.topLeftCorner(p, p).trace();
    if (p > 0) {
        const Matrix u11 = u.topLeftCorner(p, p);
        const Matrix u12 = u.topRightCorner(p, n);
        diag.tr_u11 = u11.trace();
        diag.tr_c = (u11 * vb_inv * u11).trace();
        diag.tr_d = (u12 * corr->Rinv * u12.transpose()).trace();
    }
    return diag;
}

E2Diag e2_profile(const LocationSet& chi, const MaternParams& kernel, double delta2,
                  double tau2) {
    chi.validate();
    const Index n = chi.n();
    if (n < 2) throw std::invalid_argument("e2_profile: need at least two locations");
    if (!(delta2 > 0.0) || !(tau2 > 0.0))
        throw std::invalid_argument("e2_profile: delta2 and tau2 must be positive");

    const Matrix r_full = build_corr_matrix(kernel, chi);
    E2Diag diag;
    diag.values.resize(n);
    std::vector<Index> rest(static_cast<size_t>(n - 1));
    for (Index i = 0; i < n; ++i) {
        Index pos = 0;
        for (Index j = 0; j < n; ++j)
            if (j != i) rest[static_cast<size_t>(pos++)] = j;

        Matrix r(n - 1, n - 1);
        Vector j_vec(n - 1);
        for (Index a = 0; a < n - 1; ++a) {
            j_vec(a) = r_full(rest[static_cast<size_t>(a)], i);
            for (Index b = 0; b < n - 1; ++b)
                r(a, b) = r_full(rest[static_cast<size_t>(a)], rest[static_cast<size_t>(b)]);
        }
        Eigen::LLT<Matrix> r_llt(r);
        if (r_llt.info() != Eigen::Success)
            throw std::runtime_error("e2_profile: singular correlation matrix");
        const Vector rinv_j = r_llt.solve(j_vec);

        Matrix shifted = r / delta2;
        shifted.diagonal().array() += 1.0;  // I + R/delta2
        const Vector t = shifted.llt().solve(rinv_j);
        diag.values(i) = (tau2 / delta2) * (1.0 + j_vec.dot(t) - j_vec.dot(rinv_j));
    }

    std::vector<double> sorted(diag.values.data(), diag.values.data() + n);
    std::sort(sorted.begin(), sorted.end());
    diag.q025 = quantile(sorted, 0.025);
    diag.median = quantile(sorted, 0.5);
    diag.q975 = quantile(sorted, 0.975);
    return diag;
}

std::vector<Sigma2TracePoint> sigma2_posterior_trace(const SpatialDataset& data, double nu,
                                                     const std::vector<double>& phi_grid,
                                                     double delta2,
                                                     const std::vector<Index>& n_values,
                                                     double a_sigma, double b_sigma) {
    data.validate();
    if (data.p() != 0)
        throw std::invalid_argument("sigma2_posterior_trace: expects a no-trend dataset (p = 0)");
    std::vector<Sigma2TracePoint> out;
    for (Index n : n_values) {
        if (n < 2 || n > data.n())
            throw std::invalid_argument("sigma2_posterior_trace: bad prefix size");
        std::vector<Index> idx(static_cast<size_t>(n));
        for (Index i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
        const SpatialDataset prefix = data.subset(idx);
        for (double phi : phi_grid) {
            PriorSpec prior;
            prior.mu_beta = Vector(0);
            prior.V_beta = Matrix(0, 0);
            prior.a_sigma = a_sigma;
            prior.b_sigma = b_sigma;
            prior.delta2 = delta2;
            const ConjugateFit f = fit(prefix, prior, MaternParams{phi, nu});
            out.push_back({n, phi, f.b_star / (f.a_star - 1.0)});
        }
    }
    return out;
}

double blp_error_1d(Index half_width, const BlpTruth& truth, const BlpFitted& fitted) {
    if (half_width < 1) throw std::invalid_argument("blp_error_1d: half_width must be >= 1");
    truth.kernel.validate();
    fitted.kernel.validate();
    if (!(truth.sigma2 > 0.0) || !(truth.tau2 >= 0.0) || !(fitted.delta2 > 0.0))
        throw std::invalid_argument("blp_error_1d: bad variance parameters");

    const Index m = 2 * half_width;  // grid without the origin
    Matrix coords(m, 1);
    Index pos = 0;
    for (Index i = -half_width; i <= half_width; ++i) {
        if (i == 0) continue;
        coords(pos++, 0) = static_cast<double>(i) / static_cast<double>(half_width);
    }
    const LocationSet obs(std::move(coords));
    const LocationSet origin(Matrix::Zero(1, 1));

    // Predictor weights under the fitted kernel: k = (R_f + delta2 I)^{-1} J_f.
    Matrix r_fit = build_corr_matrix(fitted.kernel, obs);
    r_fit.diagonal().array() += fitted.delta2;
    const Vector j_fit = build_cross_corr(fitted.kernel, obs, origin).col(0);
    Eigen::LLT<Matrix> llt(r_fit);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("blp_error_1d: singular fitted system");
    const Vector k = llt.solve(j_fit);

    // Error under the generating law: var z(0) - 2 k' cov(y, z(0)) + k' var(y) k.
    const Matrix r0 = build_corr_matrix(truth.kernel, obs);
    const Vector j0 = build_cross_corr(truth.kernel, obs, origin).col(0);
    Matrix vy = truth.sigma2 * r0;
    vy.diagonal().array() += truth.tau2;
    return truth.sigma2 - 2.0 * truth.sigma2 * k.dot(j0) + k.dot(vy * k);
}

}  // namespace spstack
