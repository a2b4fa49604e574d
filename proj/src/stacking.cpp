#include "spstack/stacking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "spstack/conjugate.hpp"
#include "spstack/kernel.hpp"
#include "spstack/parallel.hpp"
#include "spstack/rng.hpp"

namespace spstack {

namespace {

void check_grid_axis(const std::vector<double>& axis, const char* name) {
    if (axis.empty()) throw std::invalid_argument(std::string("CandidateGrid: empty ") + name);
    std::set<double> seen;
    for (double v : axis) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string("CandidateGrid: non-positive entry in ") +
                                        name);
        if (!seen.insert(v).second)
            throw std::invalid_argument(std::string("CandidateGrid: duplicate entry in ") + name);
    }
}

constexpr double kLog2Pi = 1.8378770664093454835606594728112353;

// Monte-Carlo fold log densities: draw (sigma2, gamma) from the fold posterior,
// form the expected outcome for every fold point, and average the conditional
// N(y | yhat^(j), delta2 sigma2^(j)) densities with a running log-sum-exp.
Vector mc_fold_lppd(const ConjugateFit& f, const Matrix& j_cross, const Matrix& x_test,
                    const SpatialDataset& data, const std::vector<Index>& te, Index draws,
                    std::uint64_t seed) {
    const Index m = x_test.rows();
    const Matrix a = j_cross.transpose() * f.corr->Rinv;  // m x n_train
    Rng rng(seed);
    const Index dim = f.p + f.n;
    Vector v(dim), gamma(dim), yhat(m);
    Vector max_log = Vector::Constant(m, -std::numeric_limits<double>::infinity());
    Vector acc = Vector::Zero(m);
    for (Index j = 0; j < draws; ++j) {
        const double s2 = f.b_star / rng.gamma(f.a_star);
        const double sd = std::sqrt(s2);
        for (Index i = 0; i < dim; ++i) v(i) = sd * rng.normal();
        gamma = f.gamma_hat + f.L.transpose().triangularView<Eigen::Upper>().solve(v);
        yhat = a * gamma.tail(f.n);
        if (f.p > 0) yhat += x_test * gamma.head(f.p);
        const double var = f.delta2 * s2;
        const double base = -0.5 * (kLog2Pi + std::log(var));
        for (Index r = 0; r < m; ++r) {
            const double resid = data.y(te[static_cast<size_t>(r)]) - yhat(r);
            const double lg = base - resid * resid / (2.0 * var);
            if (lg > max_log(r)) {
                acc(r) = acc(r) * std::exp(max_log(r) - lg) + 1.0;
                max_log(r) = lg;
            } else {
                acc(r) += std::exp(lg - max_log(r));
            }
        }
    }
    Vector lp(m);
    for (Index r = 0; r < m; ++r)
        lp(r) = max_log(r) + std::log(acc(r) / static_cast<double>(draws));
    return lp;
}

}  // namespace

CandidateGrid CandidateGrid::cartesian(std::vector<double> phis, std::vector<double> nus,
                                       std::vector<double> delta2s) {
    check_grid_axis(phis, "G_phi");
    check_grid_axis(nus, "G_nu");
    check_grid_axis(delta2s, "G_delta2");
    CandidateGrid grid;
    grid.phi = std::move(phis);
    grid.nu = std::move(nus);
    grid.delta2 = std::move(delta2s);
    grid.candidates.reserve(grid.phi.size() * grid.nu.size() * grid.delta2.size());
    for (double p : grid.phi)
        for (double v : grid.nu)
            for (double d : grid.delta2) grid.candidates.push_back({p, v, d});
    return grid;
}

std::vector<std::vector<Index>> FoldAssignment::fold_indices() const {
    std::vector<std::vector<Index>> out(static_cast<size_t>(K));
    for (Index i = 0; i < static_cast<Index>(fold_of.size()); ++i)
        out[static_cast<size_t>(fold_of[static_cast<size_t>(i)])].push_back(i);
    return out;
}

std::vector<std::vector<Index>> FoldAssignment::complement_indices() const {
    std::vector<std::vector<Index>> out(static_cast<size_t>(K));
    for (Index i = 0; i < static_cast<Index>(fold_of.size()); ++i) {
        const int k = fold_of[static_cast<size_t>(i)];
        for (int j = 0; j < K; ++j)
            if (j != k) out[static_cast<size_t>(j)].push_back(i);
    }
    return out;
}

FoldAssignment assign_folds(Index n, int K, std::uint64_t seed) {
    if (K < 2) throw std::invalid_argument("assign_folds: K must be >= 2");
    if (static_cast<Index>(K) > n) throw std::invalid_argument("assign_folds: K exceeds n");
    std::vector<Index> perm(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    Rng rng(seed);
    rng.shuffle(perm);

    FoldAssignment folds;
    folds.K = K;
    folds.seed = seed;
    folds.fold_of.assign(static_cast<size_t>(n), 0);
    const Index base = n / K;
    const Index extra = n % K;  // the first `extra` folds take one more point
    Index pos = 0;
    for (int k = 0; k < K; ++k) {
        const Index size = base + (k < extra ? 1 : 0);
        for (Index j = 0; j < size; ++j)
            folds.fold_of[static_cast<size_t>(perm[static_cast<size_t>(pos++)])] = k;
    }
    return folds;
}

CvTable build_cv_table(const SpatialDataset& data, const PriorSpec& prior_base,
                       const CandidateGrid& grid, const FoldAssignment& folds,
                       const CvOptions& options) {
    data.validate();
    const Index n = data.n();
    const Index G = grid.size();
    if (G == 0) throw std::invalid_argument("build_cv_table: empty grid");
    if (static_cast<Index>(folds.fold_of.size()) != n)
        throw std::invalid_argument("build_cv_table: fold assignment does not match data");

    CvTable cv;
    cv.yhat.resize(n, G);
    cv.zhat.resize(n, G);
    cv.lp.resize(n, G);

    const Matrix dist = pairwise_distances(data.chi);
    const auto fold_idx = folds.fold_indices();
    const auto train_idx = folds.complement_indices();

    // Fold-wise data slices are shared read-only across all candidates.
    std::vector<SpatialDataset> train_data(static_cast<size_t>(folds.K));
    std::vector<Matrix> x_test(static_cast<size_t>(folds.K));
    for (int k = 0; k < folds.K; ++k) {
        if (fold_idx[static_cast<size_t>(k)].empty())
            throw std::invalid_argument("build_cv_table: empty fold");
        train_data[static_cast<size_t>(k)] = data.subset(train_idx[static_cast<size_t>(k)]);
        const auto& te = fold_idx[static_cast<size_t>(k)];
        Matrix xt(static_cast<Index>(te.size()), data.p());
        for (Index r = 0; r < xt.rows(); ++r) xt.row(r) = data.X.row(te[static_cast<size_t>(r)]);
        x_test[static_cast<size_t>(k)] = std::move(xt);
    }

    const Index n_pairs = static_cast<Index>(grid.phi.size() * grid.nu.size());
    const Index n_d2 = static_cast<Index>(grid.delta2.size());

    parallel_for(n_pairs, options.threads, [&](Index pair) {
        const double phi = grid.phi[static_cast<size_t>(pair) / grid.nu.size()];
        const double nu = grid.nu[static_cast<size_t>(pair) % grid.nu.size()];
        const MaternParams params{phi, nu};
        const Matrix r_full = corr_from_distances(params, dist);

        for (int k = 0; k < folds.K; ++k) {
            const auto& tr = train_idx[static_cast<size_t>(k)];
            const auto& te = fold_idx[static_cast<size_t>(k)];
            const Index ntr = static_cast<Index>(tr.size());
            const Index m = static_cast<Index>(te.size());

            Matrix r_train(ntr, ntr);
            Matrix j_cross(ntr, m);
            for (Index a = 0; a < ntr; ++a) {
                for (Index b = 0; b < ntr; ++b)
                    r_train(a, b) = r_full(tr[static_cast<size_t>(a)], tr[static_cast<size_t>(b)]);
                for (Index b = 0; b < m; ++b)
                    j_cross(a, b) = r_full(tr[static_cast<size_t>(a)], te[static_cast<size_t>(b)]);
            }

            const auto& tdata = train_data[static_cast<size_t>(k)];
            auto corr = CorrFactor::from_corr(params, tdata.chi, std::move(r_train));

            for (Index id2 = 0; id2 < n_d2; ++id2) {
                const Index g = pair * n_d2 + id2;
                try {
                    PriorSpec prior = prior_base;
                    prior.delta2 = grid.delta2[static_cast<size_t>(id2)];
                    const ConjugateFit f = fit(tdata, prior, corr);
                    const PredictiveT pred =
                        predict_given_cross(f, j_cross, x_test[static_cast<size_t>(k)]);
                    Vector lp_col(m);
                    if (options.monte_carlo_lppd) {
                        const std::uint64_t s =
                            mix_seed(options.mc_seed, static_cast<std::uint64_t>(g),
                                     static_cast<std::uint64_t>(k));
                        lp_col = mc_fold_lppd(f, j_cross, x_test[static_cast<size_t>(k)],
                                              data, te, options.mc_draws, s);
                    } else {
                        for (Index r = 0; r < m; ++r)
                            lp_col(r) = log_predictive_density(
                                f.a_star, f.b_star, pred.point_scale(r), pred.location(r),
                                data.y(te[static_cast<size_t>(r)]));
                    }
                    for (Index r = 0; r < m; ++r) {
                        const Index i = te[static_cast<size_t>(r)];
                        cv.yhat(i, g) = pred.location(r);
                        cv.zhat(i, g) = pred.latent_mean(r);
                        if (!std::isfinite(lp_col(r)))
                            throw std::runtime_error("non-finite log predictive density");
                        cv.lp(i, g) = lp_col(r);
                    }
                } catch (const std::exception& e) {
                    throw std::runtime_error("build_cv_table: candidate " + std::to_string(g) +
                                             ", fold " + std::to_string(k) + ": " + e.what());
                }
            }
        }
    });
    return cv;
}

StackingWeights solve_weights_means(const Vector& y, const Matrix& yhat, bool nonneg) {
    const Index n = y.size();
    const Index G = yhat.cols();
    if (G < 1) throw std::invalid_argument("solve_weights_means: no candidates");
    if (yhat.rows() != n) throw std::invalid_argument("solve_weights_means: shape mismatch");

    StackingWeights out;
    out.solver = WeightSolver::means;
    auto objective = [&](const Vector& w) { return (y - yhat * w).squaredNorm(); };

    if (G == 1) {
        out.w = Vector::Ones(1);
        out.objective = objective(out.w);
        out.converged = true;
        out.objective_trace.push_back(out.objective);
        return out;
    }

    const Matrix q = yhat.transpose() * yhat;
    const Vector c = yhat.transpose() * y;
    const double scale = std::max(1.0, q.diagonal().maxCoeff());
    const double ridge = 1e-12 * scale;

    // Equality-constrained subproblem on a free set: KKT solve for w_F, lambda.
    auto eqp = [&](const std::vector<Index>& free, Vector& wf, double& lambda) {
        const Index f = static_cast<Index>(free.size());
        Matrix kkt = Matrix::Zero(f + 1, f + 1);
        Vector rhs(f + 1);
        for (Index a = 0; a < f; ++a) {
            for (Index b = 0; b < f; ++b)
                kkt(a, b) = q(free[static_cast<size_t>(a)], free[static_cast<size_t>(b)]);
            kkt(a, a) += ridge;
            kkt(a, f) = kkt(f, a) = 1.0;
            rhs(a) = c(free[static_cast<size_t>(a)]);
        }
        rhs(f) = 1.0;
        const Vector sol = kkt.ldlt().solve(rhs);
        wf = sol.head(f);
        lambda = sol(f);
    };

    if (!nonneg) {
        std::vector<Index> all(static_cast<size_t>(G));
        for (Index g = 0; g < G; ++g) all[static_cast<size_t>(g)] = g;
        Vector wf;
        double lambda;
        eqp(all, wf, lambda);
        out.w = wf;
        out.objective = objective(out.w);
        out.iterations = 1;
        out.converged = out.w.allFinite();
        out.objective_trace.push_back(out.objective);
        return out;
    }

    // Primal active set started from the best vertex.
    Index best = 0;
    double best_obj = std::numeric_limits<double>::infinity();
    for (Index g = 0; g < G; ++g) {
        const double v = q(g, g) - 2.0 * c(g) + y.squaredNorm();
        if (v < best_obj) {
            best_obj = v;
            best = g;
        }
    }
    Vector w = Vector::Zero(G);
    w(best) = 1.0;
    std::vector<char> in_free(static_cast<size_t>(G), 0);
    in_free[static_cast<size_t>(best)] = 1;

    const double tol = 1e-10 * scale;
    const int max_iter = 50 * static_cast<int>(G) + 50;
    int iter = 0;
    out.objective_trace.push_back(objective(w));
    for (; iter < max_iter; ++iter) {
        std::vector<Index> free;
        for (Index g = 0; g < G; ++g)
            if (in_free[static_cast<size_t>(g)]) free.push_back(g);
        Vector wf;
        double lambda;
        eqp(free, wf, lambda);

        double min_wf = wf.size() > 0 ? wf.minCoeff() : 0.0;
        if (min_wf >= -1e-12) {
            for (size_t a = 0; a < free.size(); ++a) w(free[a]) = std::max(wf(static_cast<Index>(a)), 0.0);
            for (Index g = 0; g < G; ++g)
                if (!in_free[static_cast<size_t>(g)]) w(g) = 0.0;
            // KKT check on the bound constraints.
            // Free components satisfy (Qw - c)_g = -lambda; a bound component
            // can improve the objective when its reduced cost grad_g + lambda
            // is negative.
            const Vector grad = q * w - c;
            Index enter = -1;
            double most_negative = -tol;
            for (Index g = 0; g < G; ++g) {
                if (in_free[static_cast<size_t>(g)]) continue;
                const double reduced = grad(g) + lambda;
                if (reduced < most_negative) {
                    most_negative = reduced;
                    enter = g;
                }
            }
            out.objective_trace.push_back(objective(w));
            if (enter < 0) {
                out.converged = true;
                break;
            }
            in_free[static_cast<size_t>(enter)] = 1;
        } else {
            // Partial step to the nearest blocking bound.
            double alpha = 1.0;
            Index block = -1;
            for (size_t a = 0; a < free.size(); ++a) {
                const double target = wf(static_cast<Index>(a));
                if (target < 0.0) {
                    const double cur = w(free[a]);
                    const double step = cur / (cur - target);
                    if (step < alpha) {
                        alpha = step;
                        block = free[a];
                    }
                }
            }
            for (size_t a = 0; a < free.size(); ++a)
                w(free[a]) += alpha * (wf(static_cast<Index>(a)) - w(free[a]));
            if (block >= 0) {
                w(block) = 0.0;
                in_free[static_cast<size_t>(block)] = 0;
            }
            out.objective_trace.push_back(objective(w));
        }
    }
    out.iterations = iter;

    // Normalize away round-off and drop negligible weights.
    for (Index g = 0; g < G; ++g) {
        if (w(g) < -1e-12) throw std::runtime_error("solve_weights_means: negative weight");
        if (w(g) < 1e-9) w(g) = 0.0;
    }
    const double total = w.sum();
    if (!(total > 0.0)) throw std::runtime_error("solve_weights_means: degenerate weights");
    w /= total;
    out.w = w;
    out.objective = objective(w);
    return out;
}

StackingWeights solve_weights_densities(const Matrix& lp) {
    const Index n = lp.rows();
    const Index G = lp.cols();
    if (n < 1 || G < 1) throw std::invalid_argument("solve_weights_densities: empty input");
    if (!lp.allFinite())
        throw std::invalid_argument("solve_weights_densities: non-finite log densities");

    StackingWeights out;
    out.solver = WeightSolver::densities;

    // Row-wise max shift keeps the exponentials in range; the shift adds a
    // constant to the objective which is restored at the end.
    const Vector shift = lp.rowwise().maxCoeff();
    const Matrix dens = (lp.colwise() - shift).array().exp();
    const double shift_mean = shift.mean();

    Vector w = Vector::Constant(G, 1.0 / static_cast<double>(G));
    auto shifted_objective = [&](const Vector& ww) {
        return ((dens * ww).array().max(1e-300).log()).mean();
    };

    double obj = shifted_objective(w);
    out.objective_trace.push_back(obj + shift_mean);
    if (G == 1) {
        out.w = w;
        out.objective = obj + shift_mean;
        out.converged = true;
        return out;
    }

    const int max_iter = 50000;
    const double obj_tol = 1e-10;
    const double kkt_tol = 1e-8;
    bool converged = false;
    int iter = 0;
    Vector mix(n), d(G);
    for (; iter < max_iter; ++iter) {
        mix = (dens * w).cwiseMax(1e-300);
        d = (dens.transpose() * mix.cwiseInverse()) / static_cast<double>(n);
        Vector w_next = w.cwiseProduct(d);
        w_next /= w_next.sum();

        double obj_next = shifted_objective(w_next);
        if (obj_next < obj) {
            // The exact update is monotone; any decrease is round-off. Damp
            // toward the current iterate until the objective does not drop.
            double alpha = 0.5;
            while (alpha > 1e-4) {
                Vector w_try = w + alpha * (w_next - w);
                w_try /= w_try.sum();
                const double obj_try = shifted_objective(w_try);
                if (obj_try >= obj) {
                    w_next = w_try;
                    obj_next = obj_try;
                    break;
                }
                alpha *= 0.5;
            }
            if (obj_next < obj) {
                w_next = w;
                obj_next = obj;
            }
        }

        const double kkt =
            std::max((d.array() - 1.0).maxCoeff(),
                     (w.array() * (d.array() - 1.0).abs()).maxCoeff());
        const double improvement = obj_next - obj;
        w = w_next;
        obj = obj_next;
        out.objective_trace.push_back(obj + shift_mean);
        if (improvement < obj_tol && kkt < kkt_tol) {
            converged = true;
            ++iter;
            break;
        }
    }
    out.iterations = iter;
    out.converged = converged;

    for (Index g = 0; g < G; ++g)
        if (w(g) < 1e-9) w(g) = 0.0;
    w /= w.sum();
    out.w = w;
    out.objective = shifted_objective(w) + shift_mean;
    return out;
}

}  // namespace spstack
