#pragma once

#include <optional>
#include <string>
#include <utility>

#include "convexlda/core.hpp"
#include "convexlda/dataset.hpp"
#include "convexlda/linalg.hpp"
#include "convexlda/model.hpp"
#include "convexlda/pca.hpp"

namespace convexlda {

struct ScatterMatrices {
    Matrix within;   // S_w
    Matrix between;  // S_b
};

/// S_w = sum_j sum_{i in I_j} (x_i - c_j)(x_i - c_j)^T,
/// S_b = sum_j |C_j| (c_j - m)(c_j - m)^T with m the global mean.
inline ScatterMatrices scatter_matrices(const Dataset& ds) {
    const CentroidSet cs = compute_centroids(ds);
    const Matrix residual = ds.X - cs.per_sample;
    const Vector global_mean = ds.X.rowwise().mean();
    Matrix spread = cs.unique.colwise() - global_mean;
    for (Index j = 0; j < spread.cols(); ++j) {
        spread.col(j) *= std::sqrt(static_cast<double>(cs.class_sizes[static_cast<std::size_t>(j)]));
    }
    ScatterMatrices out;
    out.within = residual * residual.transpose();
    out.between = spread * spread.transpose();
    out.within = 0.5 * (out.within + out.within.transpose()).eval();
    out.between = 0.5 * (out.between + out.between.transpose()).eval();
    return out;
}

struct FisherLdaParams {
    Index p = 1;
    /// Added to S_w's diagonal. Defaults to 1e-6 * trace(S_w) / d.
    std::optional<double> ridge;
};

inline double default_ridge(const Matrix& within) {
    return 1e-6 * within.trace() / static_cast<double>(within.rows());
}

struct FisherSolution {
    Matrix directions;   // d x p, unit columns, largest-magnitude entry positive
    Vector eigenvalues;  // every generalized eigenvalue, descending
    double ridge = 0.0;
};

/// Solves S_b w = sigma (S_w + ridge I) w through the symmetric form
/// L^{-1} S_b L^{-T} with S_w + ridge I = L L^T, keeping the top p pairs.
inline FisherSolution solve_fisher(const ScatterMatrices& sc, Index p, double ridge) {
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ValidationError("fisher_lda: ridge must be finite and >= 0");
    const Index d = sc.within.rows();
    if (p < 1 || p > d) throw ValidationError("fisher_lda: invalid embedding dimension");
    Matrix regularized = sc.within;
    regularized.diagonal().array() += ridge;
    const SpdFactor factor(regularized, "within-class scatter is singular; increase the ridge");
    const Matrix l = factor.lower();
    const auto lower = l.triangularView<Eigen::Lower>();
    const Matrix half = lower.solve(sc.between);              // L^{-1} S_b
    const Matrix sym = lower.solve(Matrix(half.transpose()));  // L^{-1} S_b L^{-T}
    const SymEigResult eig = sym_eig(0.5 * (sym + sym.transpose()));

    FisherSolution out;
    out.ridge = ridge;
    out.eigenvalues = eig.eigenvalues;
    const Matrix top = eig.eigenvectors.leftCols(p);
    out.directions = l.transpose().triangularView<Eigen::Upper>().solve(top);  // L^{-T} v
    for (Index j = 0; j < p; ++j) out.directions.col(j).normalize();
    canonicalize_signs(out.directions);
    return out;
}

inline ProjectionModel fit_fisher(const Dataset& ds, const FisherLdaParams& params) {
    ds.validate_for_fit();
    const int m = ds.num_classes();
    if (params.p < 1 || params.p > m - 1) {
        throw ValidationError("fisher_lda: p = " + std::to_string(params.p) + " must lie in [1, M-1] = [1, " +
                              std::to_string(m - 1) + "]");
    }
    const ScatterMatrices sc = scatter_matrices(ds);
    const double ridge = params.ridge.value_or(default_ridge(sc.within));
    FisherSolution sol = solve_fisher(sc, params.p, ridge);

    ProjectionModel model;
    model.A = std::move(sol.directions);
    model.method = Method::fisher_lda;
    model.params.ridge = ridge;
    model.class_names = ds.class_names;
    model.diagnostics.converged = true;
    model.diagnostics.stop_reason = "closed_form";
    return model;
}

}  // namespace convexlda
