#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "convexlda/dataset.hpp"
#include "convexlda/linalg.hpp"
#include "convexlda/model.hpp"

namespace convexlda {

/// Flips each column so its largest-magnitude entry is positive.
inline void canonicalize_signs(Matrix& a) {
    for (Index j = 0; j < a.cols(); ++j) {
        Index arg = 0;
        a.col(j).cwiseAbs().maxCoeff(&arg);
        if (a(arg, j) < 0.0) a.col(j) = -a.col(j);
    }
}

struct PcaBasis {
    Vector mean;
    Matrix basis;         // d x k, orthonormal columns
    Vector eigenvalues;   // all covariance eigenvalues, descending, clamped at 0
    Index rank = 0;
};

/// Principal axes of the feature covariance. When d > n the n x n Gram
/// matrix is decomposed instead and the axes are mapped back.
inline PcaBasis pca_basis(const Matrix& x, double variance_kept) {
    if (!(variance_kept > 0.0 && variance_kept <= 1.0)) {
        throw ValidationError("pca: variance_kept must lie in (0, 1]");
    }
    const Index d = x.rows();
    const Index n = x.cols();
    if (n < 2) throw ValidationError("pca: at least 2 samples are required");
    require_finite(x, "pca");

    PcaBasis out;
    out.mean = x.rowwise().mean();
    const Matrix centered = x.colwise() - out.mean;
    const double denom = static_cast<double>(n - 1);

    const bool gram_route = d > n;
    const SymEigResult eig = gram_route ? sym_eig(centered.transpose() * centered / denom)
                                        : sym_eig(centered * centered.transpose() / denom);
    out.eigenvalues = eig.eigenvalues.cwiseMax(0.0);
    const double total = out.eigenvalues.sum();
    const double top = out.eigenvalues.size() ? out.eigenvalues(0) : 0.0;
    if (!(total > 0.0) || !(top > 0.0)) throw ValidationError("pca: data has zero total variance");

    for (Index i = 0; i < out.eigenvalues.size(); ++i) {
        if (out.eigenvalues(i) > 1e-12 * top) ++out.rank;
    }
    Index k = out.rank;
    double cum = 0.0;
    for (Index i = 0; i < out.rank; ++i) {
        cum += out.eigenvalues(i);
        if (cum / total >= variance_kept) {
            k = i + 1;
            break;
        }
    }

    out.basis.resize(d, k);
    for (Index i = 0; i < k; ++i) {
        if (gram_route) {
            Vector u = centered * eig.eigenvectors.col(i);
            out.basis.col(i) = u / u.norm();
        } else {
            out.basis.col(i) = eig.eigenvectors.col(i);
        }
    }
    canonicalize_signs(out.basis);
    return out;
}

/// Mean-centers and projects onto the fewest leading principal axes whose
/// eigenvalue share reaches `variance_kept`. The model replays the training
/// mean and basis on new data.
inline std::pair<Dataset, ProjectionModel> pca_reduce(const Dataset& ds, double variance_kept) {
    if (static_cast<Index>(ds.labels.size()) != ds.size()) throw ShapeError("pca_reduce: label count mismatch");
    PcaBasis pb = pca_basis(ds.X, variance_kept);

    ProjectionModel model;
    model.method = Method::pca;
    model.A = std::move(pb.basis);
    model.train_mean = std::move(pb.mean);
    model.params.variance_kept = variance_kept;
    model.class_names = ds.class_names;

    Dataset reduced;
    reduced.X = transform(model, ds.X);
    reduced.labels = ds.labels;
    reduced.class_names = ds.class_names;
    return {std::move(reduced), std::move(model)};
}

/// The same reduction packaged as a preprocessing step for another model.
inline Preprocessing pca_preprocessing(const ProjectionModel& pca_model) {
    Preprocessing p;
    p.kind = Preprocessing::Kind::pca;
    p.mean = *pca_model.train_mean;
    p.basis = pca_model.A;
    p.variance_kept = pca_model.params.variance_kept;
    return p;
}

}  // namespace convexlda
