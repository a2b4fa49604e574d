#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace spstack {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Matern covariogram hyper-parameters: decay rate phi and smoothness nu.
struct MaternParams {
    double phi = 1.0;
    double nu = 0.5;

    void validate() const {
        if (!(phi > 0.0) || !std::isfinite(phi))
            throw std::invalid_argument("MaternParams: phi must be positive and finite");
        if (!(nu > 0.0) || !std::isfinite(nu))
            throw std::invalid_argument("MaternParams: nu must be positive and finite");
    }
};

/// Ordered point set in R^d, d in {1,2}. Coincident points are rejected unless
/// allow_duplicates is set, in which case downstream factorizations rely on the
/// jitter policy.
struct LocationSet {
    Matrix coords;  // n x d
    bool allow_duplicates = false;

    LocationSet() = default;
    explicit LocationSet(Matrix c, bool allow_dup = false)
        : coords(std::move(c)), allow_duplicates(allow_dup) {
        validate();
    }

    Index n() const { return coords.rows(); }
    Index dim() const { return coords.cols(); }

    void validate() const {
        if (coords.cols() < 1 || coords.cols() > 2)
            throw std::invalid_argument("LocationSet: dimension must be 1 or 2");
        if (!coords.allFinite())
            throw std::invalid_argument("LocationSet: coordinates must be finite");
    }

    LocationSet subset(const std::vector<Index>& idx) const {
        Matrix c(static_cast<Index>(idx.size()), coords.cols());
        for (Index i = 0; i < c.rows(); ++i) c.row(i) = coords.row(idx[static_cast<size_t>(i)]);
        LocationSet out;
        out.coords = std::move(c);
        out.allow_duplicates = allow_duplicates;
        return out;
    }
};

/// Conjugate prior: beta | sigma2 ~ N(mu_beta, sigma2 V_beta),
/// sigma2 ~ IG(a_sigma, b_sigma), with the noise-to-spatial variance ratio
/// delta2 = tau2/sigma2 held fixed. p = 0 (no trend) is encoded by empty
/// mu_beta and a 0x0 V_beta.
struct PriorSpec {
    Vector mu_beta;
    Matrix V_beta;
    double a_sigma = 2.0;
    double b_sigma = 2.0;
    double delta2 = 1.0;

    Index p() const { return mu_beta.size(); }

    void validate() const {
        if (V_beta.rows() != mu_beta.size() || V_beta.cols() != mu_beta.size())
            throw std::invalid_argument("PriorSpec: V_beta must be p x p");
        if (mu_beta.size() > 0 && !V_beta.isApprox(V_beta.transpose(), 1e-12))
            throw std::invalid_argument("PriorSpec: V_beta must be symmetric");
        if (!(a_sigma > 0.0) || !(b_sigma > 0.0))
            throw std::invalid_argument("PriorSpec: a_sigma and b_sigma must be positive");
        if (!(delta2 > 0.0) || !std::isfinite(delta2))
            throw std::invalid_argument("PriorSpec: delta2 must be positive and finite");
    }

    /// Default used throughout the simulation studies: mu_beta = 0, V_beta = 4 I.
    static PriorSpec standard(Index p, double delta2 = 1.0) {
        PriorSpec prior;
        prior.mu_beta = Vector::Zero(p);
        prior.V_beta = 4.0 * Matrix::Identity(p, p);
        prior.a_sigma = 2.0;
        prior.b_sigma = 2.0;
        prior.delta2 = delta2;
        return prior;
    }
};

/// Point-referenced outcomes y with design matrix X on locations chi.
struct SpatialDataset {
    LocationSet chi;
    Matrix X;  // n x p, p may be 0
    Vector y;  // n

    Index n() const { return y.size(); }
    Index p() const { return X.cols(); }

    void validate() const {
        chi.validate();
        if (X.rows() != y.size() || chi.n() != y.size())
            throw std::invalid_argument("SpatialDataset: row counts of chi, X, y disagree");
        if (!y.allFinite() || !X.allFinite())
            throw std::invalid_argument("SpatialDataset: non-finite entries in X or y");
    }

    SpatialDataset subset(const std::vector<Index>& idx) const {
        SpatialDataset out;
        out.chi = chi.subset(idx);
        out.X.resize(static_cast<Index>(idx.size()), X.cols());
        out.y.resize(static_cast<Index>(idx.size()));
        for (Index i = 0; i < out.y.size(); ++i) {
            out.X.row(i) = X.row(idx[static_cast<size_t>(i)]);
            out.y(i) = y(idx[static_cast<size_t>(i)]);
        }
        return out;
    }
};

/// Hard errors throw; soft issues (rank-deficient design) come back as warnings.
std::vector<std::string> check_dataset(const SpatialDataset& data);

}  // namespace spstack
