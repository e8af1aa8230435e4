#pragma once

// ConvexLDA: minimize
//     L(A) = ||A^T (C~ - X)||_F^2 - lambda * log det(A^T C^ C^^T A + gamma I)
// over d x p maps A, where C~ repeats each sample's class centroid and C^
// holds one column per class centroid.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "convexlda/dataset.hpp"
#include "convexlda/error.hpp"
#include "convexlda/linalg.hpp"
#include "convexlda/model.hpp"

namespace convexlda {

struct CentroidSet {
    Matrix per_sample;  // d x n, column i = centroid of sample i's class
    Matrix unique;      // d x M, column j = centroid of class j
    std::vector<Index> class_sizes;
};

inline CentroidSet compute_centroids(const Dataset& ds) {
    ds.validate();
    const int m = ds.num_classes();
    CentroidSet cs;
    cs.class_sizes = ds.class_sizes();
    cs.unique = Matrix::Zero(ds.dim(), m);
    for (Index i = 0; i < ds.size(); ++i) cs.unique.col(ds.labels[static_cast<std::size_t>(i)]) += ds.X.col(i);
    for (int j = 0; j < m; ++j) cs.unique.col(j) /= static_cast<double>(cs.class_sizes[static_cast<std::size_t>(j)]);
    cs.per_sample.resize(ds.dim(), ds.size());
    for (Index i = 0; i < ds.size(); ++i) cs.per_sample.col(i) = cs.unique.col(ds.labels[static_cast<std::size_t>(i)]);
    return cs;
}

struct ConvexLdaParams {
    Index p = 2;
    double lambda = 1.0;
    double gamma = 1e-6;

    /// lambda = 0 is accepted so the centroid-pull term can be studied alone.
    void validate() const {
        if (p < 1) throw ValidationError("convexlda: embedding dimension p must be >= 1");
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("convexlda: lambda must be finite and >= 0");
        if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ValidationError("convexlda: gamma must be finite and > 0");
    }
};

struct OptimizerConfig {
    int max_iters = 2000;
    double rel_tol = 1e-8;
    double grad_tol = 1e-6;
    double initial_step = 1.0;
    double armijo_c = 1e-4;
    double backtrack_factor = 0.5;
    std::uint64_t seed = 0;

    void validate() const {
        if (max_iters < 1) throw ValidationError("optimizer: max_iters must be >= 1");
        if (!(rel_tol > 0.0)) throw ValidationError("optimizer: rel_tol must be > 0");
        if (!(grad_tol > 0.0)) throw ValidationError("optimizer: grad_tol must be > 0");
        if (!(initial_step > 0.0) || !std::isfinite(initial_step)) throw ValidationError("optimizer: initial_step must be > 0");
        if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw ValidationError("optimizer: armijo_c must lie in (0, 1)");
        if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) {
            throw ValidationError("optimizer: backtrack_factor must lie in (0, 1)");
        }
    }
};

struct CostTerms {
    double total = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
};

/// Cost and gradient evaluator with the data-dependent parts cached.
///
/// The centroid-pull term is evaluated through the d x d residual scatter
/// when d <= n and through the p x n product A^T (C~ - X) otherwise, so the
/// HDLSS case never forms a d x d matrix.
class ConvexLdaObjective {
public:
    ConvexLdaObjective(const Matrix& x, const CentroidSet& cs, const ConvexLdaParams& params)
        : centroids_(cs.unique), lambda_(params.lambda), gamma_(params.gamma) {
        params.validate();
        if (cs.per_sample.rows() != x.rows() || cs.per_sample.cols() != x.cols()) {
            throw ShapeError("convexlda: centroid matrix " + shape_str(cs.per_sample) + " does not match X " + shape_str(x));
        }
        if (cs.unique.rows() != x.rows()) throw ShapeError("convexlda: unique centroids have the wrong row count");
        require_finite(x, "convexlda X");
        residual_ = cs.per_sample - x;
        use_scatter_ = x.rows() <= x.cols();
        if (use_scatter_) scatter_ = residual_ * residual_.transpose();
    }

    Index dim() const { return residual_.rows(); }

    CostTerms value(const Matrix& a) const {
        check(a);
        CostTerms t;
        t.l1 = pull_term(a);
        const Matrix b = centroids_.transpose() * a;  // M x p
        const SpdFactor factor(gram(b), "increase gamma");
        t.l2 = -factor.logdet();
        t.total = t.l1 + lambda_ * t.l2;
        return t;
    }

    Matrix gradient(const Matrix& a) const {
        Matrix g;
        value_and_gradient(a, g);
        return g;
    }

    /// dL/dA = 2 (C~-X)(C~-X)^T A - 2 lambda C^ C^^T A (A^T C^ C^^T A + gamma I)^{-1}
    CostTerms value_and_gradient(const Matrix& a, Matrix& grad) const {
        check(a);
        CostTerms t;
        Matrix pull_grad;
        if (use_scatter_) {
            const Matrix sa = scatter_ * a;
            t.l1 = (a.array() * sa.array()).sum();
            pull_grad = 2.0 * sa;
        } else {
            const Matrix proj = residual_.transpose() * a;  // n x p
            t.l1 = proj.squaredNorm();
            pull_grad = 2.0 * (residual_ * proj);
        }
        const Matrix b = centroids_.transpose() * a;  // M x p
        const SpdFactor factor(gram(b), "increase gamma");
        t.l2 = -factor.logdet();
        t.total = t.l1 + lambda_ * t.l2;
        // C^ C^^T A G^{-1} = C^ (G^{-1} B^T)^T with G symmetric.
        const Matrix b_ginv = factor.solve(b.transpose()).transpose();
        grad = pull_grad - (2.0 * lambda_) * (centroids_ * b_ginv);
        return t;
    }

private:
    void check(const Matrix& a) const {
        if (a.rows() != dim() || a.cols() < 1) {
            throw ShapeError("convexlda: A has shape " + shape_str(a) + ", expected " + std::to_string(dim()) + "xp");
        }
        require_finite(a, "convexlda A");
    }

    double pull_term(const Matrix& a) const {
        if (use_scatter_) return (a.array() * (scatter_ * a).array()).sum();
        return (residual_.transpose() * a).squaredNorm();
    }

    Matrix gram(const Matrix& b) const {
        Matrix g = b.transpose() * b;
        g.diagonal().array() += gamma_;
        return g;
    }

    Matrix residual_;  // C~ - X
    Matrix scatter_;   // residual_ residual_^T, only when d <= n
    Matrix centroids_;
    double lambda_;
    double gamma_;
    bool use_scatter_ = false;
};

inline CostTerms cost(const Matrix& x, const CentroidSet& cs, const Matrix& a, const ConvexLdaParams& params) {
    return ConvexLdaObjective(x, cs, params).value(a);
}

inline Matrix gradient(const Matrix& x, const CentroidSet& cs, const Matrix& a, const ConvexLdaParams& params) {
    return ConvexLdaObjective(x, cs, params).gradient(a);
}

/// Full-batch gradient descent with Armijo backtracking, starting from a
/// seeded orthonormal A. Each iteration's first trial step is the previous
/// accepted step divided by the backtrack factor. A line search that cannot
/// decrease the cost ends the fit with converged = false instead of throwing.
inline ProjectionModel fit_convexlda(const Dataset& ds, const ConvexLdaParams& params, const OptimizerConfig& opt = {}) {
    ds.validate_for_fit();
    params.validate();
    opt.validate();
    if (params.p > ds.dim()) {
        throw ValidationError("convexlda: p = " + std::to_string(params.p) + " exceeds the data dimension " +
                              std::to_string(ds.dim()));
    }
    const CentroidSet cs = compute_centroids(ds);
    const ConvexLdaObjective objective(ds.X, cs, params);

    Matrix a = orthonormal_init(ds.dim(), params.p, opt.seed);
    Matrix grad;
    CostTerms current = objective.value_and_gradient(a, grad);

    FitDiagnostics diag;
    diag.cost_trace.push_back(current.total);
    diag.stop_reason = "max_iters";
    double step = opt.initial_step;
    constexpr int kMaxBacktracks = 200;

    for (int iter = 0; iter < opt.max_iters; ++iter) {
        const double grad_max = max_abs(grad);
        if (grad_max <= opt.grad_tol) {
            diag.converged = true;
            diag.stop_reason = "grad_tol";
            break;
        }
        const double grad_sq = grad.squaredNorm();
        double t = step;
        bool accepted = false;
        Matrix trial;
        CostTerms trial_terms;
        for (int bt = 0; bt < kMaxBacktracks; ++bt, t *= opt.backtrack_factor) {
            trial = a - t * grad;
            if (trial == a) break;  // step below machine resolution
            try {
                trial_terms = objective.value(trial);
            } catch (const NumericError&) {
                continue;
            }
            if (trial_terms.total <= current.total - opt.armijo_c * t * grad_sq) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            diag.line_search_failed = true;
            diag.stop_reason = "line_search";
            break;
        }
        const double previous = current.total;
        a = std::move(trial);
        current = objective.value_and_gradient(a, grad);
        diag.cost_trace.push_back(current.total);
        diag.iterations = iter + 1;
        step = t / opt.backtrack_factor;
        if (std::abs(current.total - previous) <= opt.rel_tol * (1.0 + std::abs(current.total))) {
            diag.converged = true;
            diag.stop_reason = "rel_tol";
            break;
        }
    }

    diag.final_cost = current.total;
    diag.l1 = current.l1;
    diag.l2 = current.l2;

    ProjectionModel model;
    model.A = std::move(a);
    model.method = Method::convexlda;
    model.params.lambda = params.lambda;
    model.params.gamma = params.gamma;
    model.params.seed = opt.seed;
    model.class_names = ds.class_names;
    model.diagnostics = std::move(diag);
    return model;
}

}  // namespace convexlda
