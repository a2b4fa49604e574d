#include "spstack/kernel.hpp"

#include <cmath>
#include <stdexcept>

#include "spstack/bessel.hpp"

namespace spstack {

double matern_corr(const MaternParams& params, double dist) {
    params.validate();
    if (!(dist >= 0.0) || !std::isfinite(dist))
        throw std::invalid_argument("matern_corr: distance must be non-negative and finite");
    if (dist == 0.0) return 1.0;
    const double x = params.phi * dist;
    if (x < 1e-200) return 1.0;
    const double c =
        std::exp(params.nu * std::log(x) - std::lgamma(params.nu) -
                 (params.nu - 1.0) * 0.6931471805599453) *
        bessel_k(params.nu, x);
    return c < 1.0 ? c : 1.0;
}

Matrix pairwise_distances(const LocationSet& chi) {
    chi.validate();
    const Index n = chi.n();
    Matrix d = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            d(i, j) = d(j, i) = (chi.coords.row(i) - chi.coords.row(j)).norm();
    return d;
}

Matrix cross_distances(const LocationSet& chi, const LocationSet& chi_new) {
    chi.validate();
    chi_new.validate();
    if (chi.dim() != chi_new.dim())
        throw std::invalid_argument("cross_distances: dimension mismatch");
    Matrix d(chi.n(), chi_new.n());
    for (Index i = 0; i < chi.n(); ++i)
        for (Index j = 0; j < chi_new.n(); ++j)
            d(i, j) = (chi.coords.row(i) - chi_new.coords.row(j)).norm();
    return d;
}

Matrix corr_from_distances(const MaternParams& params, const Matrix& dist) {
    params.validate();
    Matrix r(dist.rows(), dist.cols());
    const bool square = dist.rows() == dist.cols();
    for (Index j = 0; j < dist.cols(); ++j) {
        for (Index i = 0; i < dist.rows(); ++i) {
            if (square && i > j) {
                r(i, j) = r(j, i);  // symmetric to bit-exactness
                continue;
            }
            r(i, j) = matern_corr(params, dist(i, j));
        }
    }
    return r;
}

Matrix build_corr_matrix(const MaternParams& params, const LocationSet& chi) {
    if (chi.n() < 1) throw std::invalid_argument("build_corr_matrix: empty location set");
    const Matrix d = pairwise_distances(chi);
    if (!chi.allow_duplicates) {
        for (Index i = 0; i < d.rows(); ++i)
            for (Index j = i + 1; j < d.cols(); ++j)
                if (d(i, j) == 0.0)
                    throw std::invalid_argument(
                        "build_corr_matrix: coincident locations make R singular; set "
                        "allow_duplicates to accept them under the jitter policy");
    }
    return corr_from_distances(params, d);
}

Matrix build_cross_corr(const MaternParams& params, const LocationSet& chi,
                        const LocationSet& chi_new) {
    if (chi.n() < 1 || chi_new.n() < 1)
        throw std::invalid_argument("build_cross_corr: empty location set");
    return corr_from_distances(params, cross_distances(chi, chi_new));
}

Matrix cholesky_with_jitter(Matrix a, double& jitter) {
    jitter = 0.0;
    for (;;) {
        Eigen::LLT<Matrix> llt(a);
        if (llt.info() == Eigen::Success) {
            Matrix l = llt.matrixL();
            if (l.diagonal().allFinite() && (l.diagonal().array() > 0.0).all()) return l;
        }
        if (jitter >= 1e-6)
            throw std::runtime_error(
                "cholesky_with_jitter: matrix not positive definite after maximum jitter 1e-6");
        const double next = jitter == 0.0 ? 1e-10 : jitter * 10.0;
        a.diagonal().array() += next - jitter;
        jitter = next;
    }
}

std::shared_ptr<const CorrFactor> CorrFactor::make(const MaternParams& params,
                                                   const LocationSet& chi) {
    return from_corr(params, chi, build_corr_matrix(params, chi));
}

std::shared_ptr<const CorrFactor> CorrFactor::from_corr(const MaternParams& params,
                                                        const LocationSet& chi, Matrix corr) {
    auto out = std::make_shared<CorrFactor>();
    out->params = params;
    out->chi = chi;
    out->L = cholesky_with_jitter(std::move(corr), out->jitter);
    const Index n = chi.n();
    Matrix identity = Matrix::Identity(n, n);
    out->Rinv = out->L.transpose().triangularView<Eigen::Upper>().solve(
        out->L.triangularView<Eigen::Lower>().solve(identity));
    return out;
}

std::vector<std::string> check_dataset(const SpatialDataset& data) {
    data.validate();
    std::vector<std::string> warnings;
    if (data.p() > 0) {
        Eigen::ColPivHouseholderQR<Matrix> qr(data.X);
        if (qr.rank() < data.p())
            warnings.push_back("design matrix X is rank deficient (rank " +
                               std::to_string(qr.rank()) + " < p = " +
                               std::to_string(data.p()) + ")");
    }
    return warnings;
}

}  // namespace spstack
