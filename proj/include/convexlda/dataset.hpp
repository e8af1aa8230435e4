#pragma once

// Labeled datasets (samples are columns), seeded synthetic generators,
// stratified splits and folds, and feature standardization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "convexlda/error.hpp"
#include "convexlda/linalg.hpp"

namespace convexlda {

using IndexList = std::vector<Index>;

/// d x n sample matrix with integer class labels in 0..M-1.
struct Dataset {
    Matrix X;
    std::vector<int> labels;
    std::vector<std::string> feature_names;  // empty or length d
    std::vector<std::string> class_names;    // empty or length M

    Index dim() const { return X.rows(); }
    Index size() const { return X.cols(); }

    /// M = 1 + largest label (0 for an empty label vector).
    int num_classes() const {
        if (labels.empty()) return 0;
        return *std::max_element(labels.begin(), labels.end()) + 1;
    }

    /// Per-class sample indices in ascending order.
    std::vector<IndexList> class_indices() const {
        std::vector<IndexList> out(static_cast<std::size_t>(num_classes()));
        for (std::size_t i = 0; i < labels.size(); ++i) {
            out[static_cast<std::size_t>(labels[i])].push_back(static_cast<Index>(i));
        }
        return out;
    }

    std::vector<Index> class_sizes() const {
        std::vector<Index> out(static_cast<std::size_t>(num_classes()), 0);
        for (int l : labels) ++out[static_cast<std::size_t>(l)];
        return out;
    }

    /// Checks shapes, finiteness and that every class 0..M-1 is populated.
    void validate() const {
        if (X.rows() < 1 || X.cols() < 1) throw ShapeError("dataset: X must be non-empty");
        if (static_cast<Index>(labels.size()) != X.cols()) {
            throw ShapeError("dataset: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(X.cols()) + " samples");
        }
        require_finite(X, "dataset");
        for (int l : labels) {
            if (l < 0) throw ValidationError("dataset: negative class label");
        }
        const auto sizes = class_sizes();
        for (std::size_t c = 0; c < sizes.size(); ++c) {
            if (sizes[c] == 0) {
                throw ValidationError("dataset: class " + std::to_string(c) + " has no samples");
            }
        }
        if (!feature_names.empty() && static_cast<Index>(feature_names.size()) != X.rows()) {
            throw ShapeError("dataset: feature_names length does not match d");
        }
        if (!class_names.empty() && static_cast<int>(class_names.size()) < num_classes()) {
            throw ShapeError("dataset: class_names shorter than number of classes");
        }
    }

    /// validate() plus the n >= 2, M >= 2 requirement of every fitting routine.
    void validate_for_fit() const {
        validate();
        if (size() < 2) throw ValidationError("dataset: at least 2 samples are required");
        if (num_classes() < 2) throw ValidationError("dataset: at least 2 classes are required");
    }

    /// Columns `idx` in the given order. Class metadata is kept as is.
    Dataset subset(std::span<const Index> idx) const {
        Dataset out;
        out.X.resize(X.rows(), static_cast<Index>(idx.size()));
        out.labels.reserve(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            out.X.col(static_cast<Index>(k)) = X.col(idx[k]);
            out.labels.push_back(labels[static_cast<std::size_t>(idx[k])]);
        }
        out.feature_names = feature_names;
        out.class_names = class_names;
        return out;
    }

    std::string class_name(int label) const {
        if (label >= 0 && static_cast<std::size_t>(label) < class_names.size()) {
            return class_names[static_cast<std::size_t>(label)];
        }
        return std::to_string(label);
    }
};

inline Dataset make_dataset(Matrix x, std::vector<int> labels) {
    Dataset ds{std::move(x), std::move(labels), {}, {}};
    ds.validate();
    return ds;
}

/// Keeps only samples of the named classes, relabeled 0..k-1 in the order given.
inline Dataset select_classes(const Dataset& ds, const std::vector<std::string>& names) {
    std::vector<int> remap(static_cast<std::size_t>(ds.num_classes()), -1);
    for (std::size_t k = 0; k < names.size(); ++k) {
        bool found = false;
        for (int c = 0; c < ds.num_classes(); ++c) {
            if (ds.class_name(c) == names[k]) {
                if (remap[static_cast<std::size_t>(c)] != -1) throw ValidationError("select_classes: duplicate class '" + names[k] + "'");
                remap[static_cast<std::size_t>(c)] = static_cast<int>(k);
                found = true;
            }
        }
        if (!found) throw ValidationError("select_classes: unknown class '" + names[k] + "'");
    }
    IndexList keep;
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        if (remap[static_cast<std::size_t>(ds.labels[i])] >= 0) keep.push_back(static_cast<Index>(i));
    }
    Dataset out = ds.subset(keep);
    for (int& l : out.labels) l = remap[static_cast<std::size_t>(l)];
    out.class_names = names;
    return out;
}

struct SplitPlan {
    IndexList train_indices;
    IndexList test_indices;
    std::uint64_t seed = 0;
    double train_fraction = 0.0;
};

struct SyntheticSpec {
    int n_classes = 5;
    Index dim = 100;
    Index n_total = 100;
    double class_std = 20.0;
    double mean_box = 50.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_classes < 1) throw ValidationError("synthetic: n_classes must be >= 1");
        if (dim < 1) throw ValidationError("synthetic: dim must be >= 1");
        if (n_total < n_classes) throw ValidationError("synthetic: n_total must be >= n_classes");
        if (!(class_std > 0.0) || !std::isfinite(class_std)) throw ValidationError("synthetic: class_std must be > 0");
        if (!(mean_box > 0.0) || !std::isfinite(mean_box)) throw ValidationError("synthetic: mean_box must be > 0");
    }
};

/// Isotropic Gaussian classes. Means are drawn uniformly in
/// [-mean_box, mean_box]^dim; sample i belongs to class i mod n_classes.
inline Dataset synth_gaussian(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> box(-spec.mean_box, spec.mean_box);
    std::normal_distribution<double> noise(0.0, spec.class_std);

    Matrix means(spec.dim, spec.n_classes);
    for (Index j = 0; j < means.cols(); ++j)
        for (Index i = 0; i < means.rows(); ++i) means(i, j) = box(rng);

    Dataset ds;
    ds.X.resize(spec.dim, spec.n_total);
    ds.labels.resize(static_cast<std::size_t>(spec.n_total));
    for (Index s = 0; s < spec.n_total; ++s) {
        const int c = static_cast<int>(s % spec.n_classes);
        ds.labels[static_cast<std::size_t>(s)] = c;
        for (Index i = 0; i < spec.dim; ++i) ds.X(i, s) = means(i, c) + noise(rng);
    }
    for (int c = 0; c < spec.n_classes; ++c) ds.class_names.push_back("class" + std::to_string(c));
    return ds;
}

/// Per-class train count floor(fraction * size); the remainder goes to test.
inline Index stratified_train_count(Index class_size, double train_fraction) {
    // The 1e-9 nudge keeps products such as 0.57 * 100 from flooring to 56.
    return static_cast<Index>(std::floor(train_fraction * static_cast<double>(class_size) + 1e-9));
}

inline SplitPlan stratified_split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ValidationError("stratified_split: train_fraction must lie in (0, 1)");
    }
    if (static_cast<Index>(ds.labels.size()) != ds.size()) throw ShapeError("stratified_split: label count mismatch");
    auto classes = ds.class_indices();
    for (std::size_t c = 0; c < classes.size(); ++c) {
        if (classes[c].size() < 2) {
            throw ValidationError("stratified_split: class " + std::to_string(c) + " has fewer than 2 samples");
        }
    }
    std::mt19937_64 rng(seed);
    SplitPlan plan;
    plan.seed = seed;
    plan.train_fraction = train_fraction;
    for (auto& members : classes) {
        std::shuffle(members.begin(), members.end(), rng);
        const auto n_train = static_cast<std::size_t>(stratified_train_count(static_cast<Index>(members.size()), train_fraction));
        plan.train_indices.insert(plan.train_indices.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
        plan.test_indices.insert(plan.test_indices.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
    }
    std::sort(plan.train_indices.begin(), plan.train_indices.end());
    std::sort(plan.test_indices.begin(), plan.test_indices.end());
    return plan;
}

/// Stratified k-fold partition; plan i tests on fold i. Shuffled members of
/// every class are dealt round-robin, continuing the fold counter across
/// classes so fold sizes stay balanced.
inline std::vector<SplitPlan> kfold_indices(Index n, std::span<const int> labels, int k, std::uint64_t seed) {
    if (k < 2) throw ValidationError("kfold_indices: k must be >= 2");
    if (static_cast<Index>(labels.size()) != n) throw ShapeError("kfold_indices: label count does not match n");
    int n_classes = 0;
    for (int l : labels) {
        if (l < 0) throw ValidationError("kfold_indices: negative label");
        n_classes = std::max(n_classes, l + 1);
    }
    std::vector<IndexList> classes(static_cast<std::size_t>(n_classes));
    for (Index i = 0; i < n; ++i) classes[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);
    for (std::size_t c = 0; c < classes.size(); ++c) {
        if (!classes[c].empty() && static_cast<int>(classes[c].size()) < k) {
            throw ValidationError("kfold_indices: class " + std::to_string(c) + " has fewer than k=" +
                                  std::to_string(k) + " samples");
        }
    }
    std::mt19937_64 rng(seed);
    std::vector<int> fold_of(static_cast<std::size_t>(n), 0);
    std::size_t counter = 0;
    for (auto& members : classes) {
        std::shuffle(members.begin(), members.end(), rng);
        for (Index idx : members) fold_of[static_cast<std::size_t>(idx)] = static_cast<int>(counter++ % static_cast<std::size_t>(k));
    }
    std::vector<SplitPlan> plans(static_cast<std::size_t>(k));
    for (int f = 0; f < k; ++f) {
        auto& plan = plans[static_cast<std::size_t>(f)];
        plan.seed = seed;
        plan.train_fraction = static_cast<double>(k - 1) / static_cast<double>(k);
        for (Index i = 0; i < n; ++i) {
            (fold_of[static_cast<std::size_t>(i)] == f ? plan.test_indices : plan.train_indices).push_back(i);
        }
    }
    return plans;
}

/// Centers every feature and scales it to unit (population) standard
/// deviation. Features with std < 1e-12 are only centered and report std 1.
inline std::tuple<Dataset, Vector, Vector> standardize(const Dataset& ds) {
    const Index n = ds.size();
    Vector mean = ds.X.rowwise().mean();
    Matrix centered = ds.X.colwise() - mean;
    Vector stddev(ds.dim());
    for (Index i = 0; i < ds.dim(); ++i) {
        const double s = std::sqrt(centered.row(i).squaredNorm() / static_cast<double>(n));
        stddev(i) = s < 1e-12 ? 1.0 : s;
    }
    Dataset out = ds;
    out.X = stddev.cwiseInverse().asDiagonal() * centered;
    return {std::move(out), std::move(mean), std::move(stddev)};
}

}  // namespace convexlda
