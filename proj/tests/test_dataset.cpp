#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "convexlda/dataset.hpp"
#include "convexlda/pca.hpp"
#include "support.hpp"

using namespace convexlda;
using testsupport::Gen;

namespace {

Dataset labelled(std::vector<int> labels) {
    Gen g(5);
    const auto n = static_cast<Index>(labels.size());
    return make_dataset(g.matrix(3, n), std::move(labels));
}

void expect_partition(const SplitPlan& plan, Index n) {
    std::vector<int> seen(static_cast<std::size_t>(n), 0);
    for (Index i : plan.train_indices) ++seen[static_cast<std::size_t>(i)];
    for (Index i : plan.test_indices) ++seen[static_cast<std::size_t>(i)];
    for (Index i = 0; i < n; ++i) ASSERT_EQ(seen[static_cast<std::size_t>(i)], 1) << "index " << i;
}

}  // namespace

TEST(Dataset, ValidateRejectsMissingClassAndBadShapes) {
    EXPECT_THROW(make_dataset(Matrix::Zero(2, 3), {0, 2, 0}), ValidationError);
    EXPECT_THROW(make_dataset(Matrix::Zero(2, 3), {0, 1}), ShapeError);
    EXPECT_THROW(make_dataset(Matrix::Zero(2, 2), {0, -1}), ValidationError);
    Matrix x = Matrix::Zero(2, 2);
    x(0, 0) = std::nan("");
    EXPECT_THROW(make_dataset(x, {0, 1}), ValidationError);
}

TEST(Dataset, FitRequiresTwoSamplesAndTwoClasses) {
    EXPECT_THROW(make_dataset(Matrix::Zero(2, 3), {0, 0, 0}).validate_for_fit(), ValidationError);
    EXPECT_NO_THROW(make_dataset(Matrix::Zero(2, 2), {0, 1}).validate_for_fit());
}

TEST(Dataset, SubsetAndSelectClasses) {
    Dataset ds = labelled({0, 1, 2, 1, 0, 2});
    ds.class_names = {"a", "b", "c"};
    const Dataset sel = select_classes(ds, {"c", "a"});
    EXPECT_EQ(sel.size(), 4);
    EXPECT_EQ(sel.labels, (std::vector<int>{1, 0, 1, 0}));
    EXPECT_EQ(sel.class_names, (std::vector<std::string>{"c", "a"}));
    EXPECT_TRUE(sel.X.col(0) == ds.X.col(0));
    EXPECT_THROW(select_classes(ds, {"z"}), ValidationError);
}

TEST(Synthetic, ToySpecHasBalancedClassesAndExpectedSpread) {
    SyntheticSpec spec;
    spec.seed = 3;
    const Dataset ds = synth_gaussian(spec);
    EXPECT_EQ(ds.dim(), 100);
    EXPECT_EQ(ds.size(), 100);
    EXPECT_EQ(ds.class_sizes(), (std::vector<Index>(5, 20)));
    double total = 0.0;
    int count = 0;
    for (const auto& members : ds.class_indices()) {
        for (Index r = 0; r < ds.dim(); ++r) {
            double mean = 0.0;
            for (Index i : members) mean += ds.X(r, i);
            mean /= static_cast<double>(members.size());
            double ss = 0.0;
            for (Index i : members) ss += (ds.X(r, i) - mean) * (ds.X(r, i) - mean);
            total += std::sqrt(ss / static_cast<double>(members.size() - 1));
            ++count;
        }
    }
    EXPECT_NEAR(total / count, 20.0, 0.25 * 20.0);
}

TEST(Synthetic, VanishingNoiseCollapsesOntoMeans) {
    SyntheticSpec spec;
    spec.class_std = 0.001;
    const Dataset ds = synth_gaussian(spec);
    for (const auto& members : ds.class_indices()) {
        for (Index i : members) EXPECT_LT((ds.X.col(i) - ds.X.col(members.front())).cwiseAbs().maxCoeff(), 0.02);
    }
    const Dataset again = synth_gaussian(spec);
    EXPECT_TRUE(ds.X == again.X);
    EXPECT_LE(ds.X.cwiseAbs().maxCoeff(), 50.0 + 0.01);
}

TEST(Synthetic, BitwiseDeterministicAndUneven) {
    SyntheticSpec spec;
    spec.n_classes = 3;
    spec.dim = 4;
    spec.n_total = 10;
    spec.seed = 9;
    const Dataset a = synth_gaussian(spec);
    const Dataset b = synth_gaussian(spec);
    EXPECT_TRUE(a.X == b.X);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.class_sizes(), (std::vector<Index>{4, 3, 3}));
    spec.n_total = 2;
    EXPECT_THROW(synth_gaussian(spec), ValidationError);
}

TEST(StratifiedSplit, ExactProportions) {
    const Dataset ds = labelled({0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
    const SplitPlan plan = stratified_split(ds, 0.8, 1);
    EXPECT_EQ(plan.train_indices.size(), 8u);
    EXPECT_EQ(plan.test_indices.size(), 2u);
    std::map<int, int> test_per_class;
    for (Index i : plan.test_indices) ++test_per_class[ds.labels[static_cast<std::size_t>(i)]];
    EXPECT_EQ(test_per_class[0], 1);
    EXPECT_EQ(test_per_class[1], 1);
}

TEST(StratifiedSplit, FloorRuleOnUnevenClasses) {
    // Sizes (3, 5) at 0.5: floor(1.5) = 1 and floor(2.5) = 2.
    const Dataset ds = labelled({0, 1, 0, 1, 1, 0, 1, 1});
    const SplitPlan plan = stratified_split(ds, 0.5, 4);
    std::map<int, int> train_per_class;
    for (Index i : plan.train_indices) ++train_per_class[ds.labels[static_cast<std::size_t>(i)]];
    EXPECT_EQ(train_per_class[0], 1);
    EXPECT_EQ(train_per_class[1], 2);
}

TEST(StratifiedSplit, DeterministicAndRejectsSingletonClass) {
    const Dataset ds = labelled({0, 1, 0, 1, 0, 1, 0});
    const SplitPlan a = stratified_split(ds, 0.6, 12);
    const SplitPlan b = stratified_split(ds, 0.6, 12);
    EXPECT_EQ(a.train_indices, b.train_indices);
    EXPECT_EQ(a.test_indices, b.test_indices);
    EXPECT_THROW(stratified_split(labelled({0, 0, 1}), 0.5, 0), ValidationError);
    EXPECT_THROW(stratified_split(ds, 1.0, 0), ValidationError);
}

TEST(StratifiedSplit, SetAlgebraOnRandomLabelVectors) {
    Gen g(40);
    for (int trial = 0; trial < 100; ++trial) {
        const int m = g.integer(2, 5);
        const Index n = g.integer(2 * m, 60);
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % m);
        std::shuffle(labels.begin(), labels.end(), g.engine());
        const Dataset ds = make_dataset(Matrix::Zero(1, n), labels);
        const double f = g.uniform(0.1, 0.9);
        const SplitPlan plan = stratified_split(ds, f, static_cast<std::uint64_t>(trial));
        expect_partition(plan, n);
        const auto sizes = ds.class_sizes();
        std::vector<Index> train_count(static_cast<std::size_t>(m), 0);
        for (Index i : plan.train_indices) ++train_count[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
        for (int c = 0; c < m; ++c) {
            const auto expected = static_cast<Index>(std::floor(f * static_cast<double>(sizes[static_cast<std::size_t>(c)]) + 1e-9));
            EXPECT_EQ(train_count[static_cast<std::size_t>(c)], expected);
        }
        EXPECT_TRUE(std::is_sorted(plan.train_indices.begin(), plan.train_indices.end()));
    }
}

TEST(KFold, EvenSingleClass) {
    const std::vector<int> labels(10, 0);
    const auto plans = kfold_indices(10, labels, 5, 0);
    ASSERT_EQ(plans.size(), 5u);
    for (const auto& p : plans) {
        EXPECT_EQ(p.test_indices.size(), 2u);
        expect_partition(p, 10);
    }
}

TEST(KFold, OnePerClassPerFold) {
    const std::vector<int> labels{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    for (const auto& p : kfold_indices(10, labels, 5, 3)) {
        ASSERT_EQ(p.test_indices.size(), 2u);
        EXPECT_NE(labels[static_cast<std::size_t>(p.test_indices[0])], labels[static_cast<std::size_t>(p.test_indices[1])]);
    }
}

TEST(KFold, RejectsSmallClassAndBadK) {
    EXPECT_THROW(kfold_indices(5, std::vector<int>{0, 0, 0, 1, 1}, 3, 0), ValidationError);
    EXPECT_THROW(kfold_indices(4, std::vector<int>{0, 0, 1, 1}, 1, 0), ValidationError);
}

TEST(KFold, SetAlgebraOnRandomLabelVectors) {
    Gen g(41);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = g.integer(2, 6);
        const int m = g.integer(1, 4);
        std::vector<int> labels;
        for (int c = 0; c < m; ++c)
            for (int s = g.integer(k, 3 * k); s > 0; --s) labels.push_back(c);
        std::shuffle(labels.begin(), labels.end(), g.engine());
        const auto n = static_cast<Index>(labels.size());
        const auto plans = kfold_indices(n, labels, k, static_cast<std::uint64_t>(trial));
        ASSERT_EQ(static_cast<int>(plans.size()), k);
        std::vector<int> tested(static_cast<std::size_t>(n), 0);
        for (const auto& p : plans) {
            expect_partition(p, n);
            for (Index i : p.test_indices) ++tested[static_cast<std::size_t>(i)];
        }
        for (int t : tested) ASSERT_EQ(t, 1);
        for (int c = 0; c < m; ++c) {
            std::vector<int> per_fold;
            for (const auto& p : plans) {
                per_fold.push_back(static_cast<int>(std::count_if(p.test_indices.begin(), p.test_indices.end(), [&](Index i) {
                    return labels[static_cast<std::size_t>(i)] == c;
                })));
            }
            const auto [lo, hi] = std::minmax_element(per_fold.begin(), per_fold.end());
            EXPECT_LE(*hi - *lo, 1);
        }
    }
}

TEST(Standardize, ConstantFeatureRecordsUnitStd) {
    Matrix x(2, 4);
    x << 3, 3, 3, 3, 1, 2, 3, 4;
    const auto [out, mean, sd] = standardize(make_dataset(x, {0, 1, 0, 1}));
    EXPECT_DOUBLE_EQ(sd(0), 1.0);
    EXPECT_DOUBLE_EQ(mean(0), 3.0);
    for (Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(out.X(0, i), 0.0);
}

TEST(Standardize, MomentsAndIdempotence) {
    Gen g(50);
    Matrix x = g.matrix(6, 40);
    for (Index r = 0; r < 6; ++r) x.row(r) = x.row(r) * (r + 1.0) * 7.0 + Eigen::RowVectorXd::Constant(40, 10.0 * r);
    const Dataset ds = make_dataset(x, g.labels(40, 2));
    const auto [once, mean, sd] = standardize(ds);
    for (Index r = 0; r < 6; ++r) {
        const double m = once.X.row(r).mean();
        EXPECT_LE(std::abs(m), 1e-12);
        const double s = std::sqrt((once.X.row(r).array() - m).square().sum() / 40.0);
        EXPECT_NEAR(s, 1.0, 1e-10);
    }
    const auto [twice, mean2, sd2] = standardize(once);
    EXPECT_LT((twice.X - once.X).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pca, TwoPlaneInFiveDimensions) {
    Gen g(60);
    const Matrix basis = orthonormal_init(5, 2, 3);
    const Matrix coeffs = g.matrix(2, 30);
    const Matrix x = (basis * coeffs).colwise() + Vector::LinSpaced(5, 1.0, 5.0);
    const Dataset ds = make_dataset(x, g.labels(30, 2));
    const auto [reduced, model] = pca_reduce(ds, 0.98);
    EXPECT_EQ(reduced.dim(), 2);
    const Matrix rebuilt = (model.A * reduced.X).colwise() + *model.train_mean;
    EXPECT_LE((rebuilt - x).cwiseAbs().maxCoeff(), 1e-8);
    const auto [full, full_model] = pca_reduce(ds, 1.0);
    EXPECT_EQ(full.dim(), 2);
}

TEST(Pca, FullRetentionKeepsRank) {
    Gen g(61);
    const Matrix x = g.matrix(4, 7) * g.matrix(7, 50);  // rank 4 in R^4
    const auto [reduced, model] = pca_reduce(make_dataset(x, g.labels(50, 2)), 1.0);
    EXPECT_EQ(reduced.dim(), 4);
    const Matrix low = g.matrix(8, 3) * g.matrix(3, 20);  // rank 3 in R^8 (centering may drop one more)
    const auto [r2, m2] = pca_reduce(make_dataset(low, g.labels(20, 2)), 1.0);
    Eigen::JacobiSVD<Matrix> svd(low.colwise() - low.rowwise().mean());
    svd.setThreshold(1e-10);
    EXPECT_EQ(r2.dim(), svd.rank());
}

TEST(Pca, MinimalComponentCountAgainstEigenvalueSums) {
    Gen g(62);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix x = g.matrix(20, 100);
        for (Index r = 0; r < 20; ++r) x.row(r) *= std::pow(0.8, static_cast<double>(r));
        const auto [reduced, model] = pca_reduce(make_dataset(x, g.labels(100, 3)), 0.98);
        const Matrix c = x.colwise() - x.rowwise().mean();
        const SymEigResult eig = sym_eig(c * c.transpose() / 99.0);
        const double total = eig.eigenvalues.sum();
        const Index k = reduced.dim();
        EXPECT_GE(eig.eigenvalues.head(k).sum() / total, 0.98);
        if (k > 1) EXPECT_LT(eig.eigenvalues.head(k - 1).sum() / total, 0.98);
        // Retained share of the embedded data itself.
        EXPECT_NEAR(reduced.X.squaredNorm() / c.squaredNorm(), eig.eigenvalues.head(k).sum() / total, 1e-9);
    }
}

TEST(Pca, GramRouteMatchesCovarianceRoute) {
    Gen g(63);
    const Matrix x = g.matrix(30, 12);
    const PcaBasis wide = pca_basis(x, 0.9);
    const Matrix c = x.colwise() - x.rowwise().mean();
    const SymEigResult eig = sym_eig(c * c.transpose() / 11.0);
    for (Index i = 0; i < wide.basis.cols(); ++i) {
        EXPECT_NEAR(std::abs(wide.basis.col(i).dot(eig.eigenvectors.col(i))), 1.0, 1e-8);
    }
}

TEST(Pca, NoLeakageAndZeroVariance) {
    Gen g(64);
    const Dataset ds = make_dataset(g.matrix(5, 20), g.labels(20, 2));
    const auto [reduced, model] = pca_reduce(ds, 0.98);
    EXPECT_TRUE(transform(model, ds.X) == reduced.X);
    EXPECT_TRUE(transform(model, ds.X) == transform(model, ds.X));
    EXPECT_THROW(pca_reduce(make_dataset(Matrix::Ones(3, 4), {0, 1, 0, 1}), 0.98), ValidationError);
    EXPECT_THROW(pca_reduce(ds, 0.0), ValidationError);
}
