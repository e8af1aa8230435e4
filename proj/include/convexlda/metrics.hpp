#pragma once

// k-NN classification and the class-separation measures used to study
// embeddings: directed Hausdorff distance, class scatter (CS) and mean set
// distance (MSD). Points are the columns of each matrix.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "convexlda/error.hpp"
#include "convexlda/linalg.hpp"

namespace convexlda {

namespace detail {

/// Squared Euclidean distance summed in coordinate order, so ties and
/// values are reproducible by any straightforward loop.
inline double squared_distance(const Matrix& a, Index i, const Matrix& b, Index j) {
    double acc = 0.0;
    for (Index r = 0; r < a.rows(); ++r) {
        const double diff = a(r, i) - b(r, j);
        acc += diff * diff;
    }
    return acc;
}

inline void require_same_rows(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows()) {
        throw ShapeError(std::string(what) + ": point dimensions differ (" + std::to_string(a.rows()) + " vs " +
                         std::to_string(b.rows()) + ")");
    }
}

}  // namespace detail

/// Majority vote of the k nearest training points. Distance ties (in squared
/// Euclidean distance) go to the lower training index; vote ties go to the
/// smallest label.
inline std::vector<int> knn_predict(const Matrix& train, std::span<const int> train_labels, const Matrix& test, int k) {
    if (train.cols() < 1) throw ValidationError("knn_predict: empty training set");
    if (static_cast<Index>(train_labels.size()) != train.cols()) throw ShapeError("knn_predict: label count mismatch");
    if (k < 1 || k > train.cols()) {
        throw ValidationError("knn_predict: k = " + std::to_string(k) + " must lie in [1, " + std::to_string(train.cols()) + "]");
    }
    if (test.cols() > 0) detail::require_same_rows(train, test, "knn_predict");

    const Index n_train = train.cols();
    std::vector<int> out(static_cast<std::size_t>(test.cols()));
    std::vector<double> dist(static_cast<std::size_t>(n_train));
    std::vector<Index> order(static_cast<std::size_t>(n_train));
    for (Index t = 0; t < test.cols(); ++t) {
        for (Index i = 0; i < n_train; ++i) dist[static_cast<std::size_t>(i)] = detail::squared_distance(test, t, train, i);
        std::iota(order.begin(), order.end(), Index{0});
        auto closer = [&](Index a, Index b) {
            const double da = dist[static_cast<std::size_t>(a)];
            const double db = dist[static_cast<std::size_t>(b)];
            return da < db || (da == db && a < b);
        };
        std::partial_sort(order.begin(), order.begin() + k, order.end(), closer);
        std::map<int, int> votes;
        for (int r = 0; r < k; ++r) ++votes[train_labels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])]];
        int best_label = votes.begin()->first;
        int best_count = -1;
        for (const auto& [label, count] : votes) {  // ascending label order
            if (count > best_count) {
                best_label = label;
                best_count = count;
            }
        }
        out[static_cast<std::size_t>(t)] = best_label;
    }
    return out;
}

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) {
        throw ValidationError("accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                              std::to_string(truth.size()) + " labels");
    }
    if (truth.empty()) throw ValidationError("accuracy: empty label vector");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Leave-one-out 1-NN accuracy over a fixed embedding: every point is
/// classified by its nearest other point (ties to the lower index).
inline double loo_1nn_accuracy(const Matrix& z, std::span<const int> labels) {
    if (z.cols() < 2) throw ValidationError("loo_1nn_accuracy: need at least 2 points");
    if (static_cast<Index>(labels.size()) != z.cols()) throw ShapeError("loo_1nn_accuracy: label count mismatch");
    std::size_t hits = 0;
    for (Index i = 0; i < z.cols(); ++i) {
        Index best = -1;
        double best_d = 0.0;
        for (Index j = 0; j < z.cols(); ++j) {
            if (j == i) continue;
            const double d = detail::squared_distance(z, i, z, j);
            if (best < 0 || d < best_d) {
                best = j;
                best_d = d;
            }
        }
        hits += labels[static_cast<std::size_t>(best)] == labels[static_cast<std::size_t>(i)] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(z.cols());
}

/// max over x in `from` of min over y in `to` of ||x - y||.
inline double directed_hausdorff(const Matrix& from, const Matrix& to) {
    if (from.cols() < 1 || to.cols() < 1) throw ValidationError("directed_hausdorff: point sets must be non-empty");
    detail::require_same_rows(from, to, "directed_hausdorff");
    double worst = 0.0;
    for (Index i = 0; i < from.cols(); ++i) {
        double nearest = detail::squared_distance(from, i, to, 0);
        for (Index j = 1; j < to.cols(); ++j) nearest = std::min(nearest, detail::squared_distance(from, i, to, j));
        worst = std::max(worst, nearest);
    }
    return std::sqrt(worst);
}

inline double hausdorff(const Matrix& a, const Matrix& b) {
    return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

/// CS: mean distance of a class's points to their own centroid.
inline double class_scatter(const Matrix& z) {
    if (z.cols() < 1) throw ValidationError("class_scatter: class must be non-empty");
    Matrix centroid = Matrix::Zero(z.rows(), 1);
    for (Index i = 0; i < z.cols(); ++i)
        for (Index r = 0; r < z.rows(); ++r) centroid(r, 0) += z(r, i);
    for (Index r = 0; r < z.rows(); ++r) centroid(r, 0) /= static_cast<double>(z.cols());
    double total = 0.0;
    for (Index i = 0; i < z.cols(); ++i) total += std::sqrt(detail::squared_distance(z, i, centroid, 0));
    return total / static_cast<double>(z.cols());
}

/// MSD: mean distance over all cross pairs. The pair distances are summed in
/// ascending order, which makes the result exactly symmetric in its arguments.
inline double mean_set_distance(const Matrix& a, const Matrix& b) {
    if (a.cols() < 1 || b.cols() < 1) throw ValidationError("mean_set_distance: point sets must be non-empty");
    detail::require_same_rows(a, b, "mean_set_distance");
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(a.cols() * b.cols()));
    for (Index i = 0; i < a.cols(); ++i)
        for (Index j = 0; j < b.cols(); ++j) dists.push_back(std::sqrt(detail::squared_distance(a, i, b, j)));
    std::sort(dists.begin(), dists.end());
    double total = 0.0;
    for (double d : dists) total += d;
    return total / (static_cast<double>(a.cols()) * static_cast<double>(b.cols()));
}

/// Columns of `z` grouped by label; entry c holds the points of class c.
inline std::vector<Matrix> split_by_class(const Matrix& z, std::span<const int> labels, int n_classes) {
    if (static_cast<Index>(labels.size()) != z.cols()) throw ShapeError("split_by_class: label count mismatch");
    std::vector<Index> counts(static_cast<std::size_t>(n_classes), 0);
    for (int l : labels) {
        if (l < 0 || l >= n_classes) throw ValidationError("split_by_class: label out of range");
        ++counts[static_cast<std::size_t>(l)];
    }
    std::vector<Matrix> out;
    for (int c = 0; c < n_classes; ++c) out.emplace_back(z.rows(), counts[static_cast<std::size_t>(c)]);
    std::vector<Index> fill(static_cast<std::size_t>(n_classes), 0);
    for (Index i = 0; i < z.cols(); ++i) {
        const auto c = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
        out[c].col(fill[c]++) = z.col(i);
    }
    return out;
}

}  // namespace convexlda
