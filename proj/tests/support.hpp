#pragma once

// Seeded generators and brute-force reference implementations shared by the
// unit suites and the acceptance runner. The references follow the textbook
// definitions directly and avoid the library's helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "convexlda/convexlda.hpp"

namespace testsupport {

using convexlda::Index;
using convexlda::Matrix;
using convexlda::Vector;

class Gen {
public:
    explicit Gen(std::uint64_t seed) : eng_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }

    Matrix matrix(Index rows, Index cols) {
        Matrix m(rows, cols);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i) m(i, j) = normal();
        return m;
    }

    /// Small integer coordinates so that distance ties are common.
    Matrix grid_points(Index rows, Index cols, int span) {
        Matrix m(rows, cols);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i) m(i, j) = integer(-span, span);
        return m;
    }

    /// R^T R + shift I with R standard normal.
    Matrix spd(Index n, double shift = 1.0) {
        const Matrix r = matrix(n, n);
        Matrix s = r.transpose() * r;
        s.diagonal().array() += shift;
        return 0.5 * (s + s.transpose());
    }

    Matrix symmetric(Index n) {
        const Matrix r = matrix(n, n);
        return 0.5 * (r + r.transpose());
    }

    /// n labels over m classes, every class present, order shuffled.
    std::vector<int> labels(Index n, int m) {
        std::vector<int> out(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i < m ? static_cast<int>(i) : integer(0, m - 1);
        std::shuffle(out.begin(), out.end(), eng_);
        return out;
    }

    convexlda::Dataset dataset(Index d, Index n, int m, double spread = 1.0) {
        Matrix means = matrix(d, m) * 3.0;
        auto lab = labels(n, m);
        Matrix x(d, n);
        for (Index i = 0; i < n; ++i) {
            for (Index r = 0; r < d; ++r) x(r, i) = means(r, lab[static_cast<std::size_t>(i)]) + spread * normal();
        }
        return convexlda::make_dataset(std::move(x), std::move(lab));
    }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

inline double dist(const Matrix& a, Index i, const Matrix& b, Index j) {
    double s = 0.0;
    for (Index r = 0; r < a.rows(); ++r) s += (a(r, i) - b(r, j)) * (a(r, i) - b(r, j));
    return std::sqrt(s);
}

/// Full sort of (distance, index) pairs; counts votes in a dense table.
inline std::vector<int> knn_reference(const Matrix& train, const std::vector<int>& labels, const Matrix& test, int k) {
    std::vector<int> out;
    const int n_labels = *std::max_element(labels.begin(), labels.end()) + 1;
    for (Index t = 0; t < test.cols(); ++t) {
        std::vector<std::pair<double, Index>> cand;
        for (Index i = 0; i < train.cols(); ++i) cand.emplace_back(dist(test, t, train, i), i);
        std::sort(cand.begin(), cand.end());
        std::vector<int> votes(static_cast<std::size_t>(n_labels), 0);
        for (int r = 0; r < k; ++r) ++votes[static_cast<std::size_t>(labels[static_cast<std::size_t>(cand[static_cast<std::size_t>(r)].second)])];
        int best = 0;
        for (int l = 1; l < n_labels; ++l)
            if (votes[static_cast<std::size_t>(l)] > votes[static_cast<std::size_t>(best)]) best = l;
        out.push_back(best);
    }
    return out;
}

inline double directed_hausdorff_reference(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (Index i = 0; i < a.cols(); ++i) {
        double nearest = INFINITY;
        for (Index j = 0; j < b.cols(); ++j) nearest = std::min(nearest, dist(a, i, b, j));
        worst = std::max(worst, nearest);
    }
    return worst;
}

inline double class_scatter_reference(const Matrix& z) {
    Matrix c = Matrix::Zero(z.rows(), 1);
    for (Index i = 0; i < z.cols(); ++i)
        for (Index r = 0; r < z.rows(); ++r) c(r, 0) += z(r, i);
    for (Index r = 0; r < z.rows(); ++r) c(r, 0) /= static_cast<double>(z.cols());
    double s = 0.0;
    for (Index i = 0; i < z.cols(); ++i) s += dist(z, i, c, 0);
    return s / static_cast<double>(z.cols());
}

/// Every cross-pair distance collected in a multiset, summed in its order.
inline double mean_set_distance_reference(const Matrix& a, const Matrix& b) {
    std::multiset<double> all;
    for (Index i = 0; i < a.cols(); ++i)
        for (Index j = 0; j < b.cols(); ++j) all.insert(dist(a, i, b, j));
    double s = 0.0;
    for (double v : all) s += v;
    return s / (static_cast<double>(a.cols()) * static_cast<double>(b.cols()));
}

/// Plain double loop without any canonical ordering.
inline double mean_set_distance_naive(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (Index i = 0; i < a.cols(); ++i)
        for (Index j = 0; j < b.cols(); ++j) s += dist(a, i, b, j);
    return s / (static_cast<double>(a.cols()) * static_cast<double>(b.cols()));
}

/// Determinant by cofactor expansion along the first row.
inline double cofactor_det(const Matrix& m) {
    const Index n = m.rows();
    if (n == 1) return m(0, 0);
    if (n == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    double det = 0.0;
    for (Index c = 0; c < n; ++c) {
        Matrix minor(n - 1, n - 1);
        for (Index i = 1; i < n; ++i) {
            Index cc = 0;
            for (Index j = 0; j < n; ++j) {
                if (j == c) continue;
                minor(i - 1, cc++) = m(i, j);
            }
        }
        det += ((c % 2 == 0) ? 1.0 : -1.0) * m(0, c) * cofactor_det(minor);
    }
    return det;
}

/// Closed-form eigenvalues of a symmetric 2x2 matrix, descending.
inline std::vector<double> eig2_closed_form(const Matrix& s) {
    const double a = s(0, 0), b = s(0, 1), d = s(1, 1);
    const double mid = 0.5 * (a + d);
    const double rad = std::sqrt(0.25 * (a - d) * (a - d) + b * b);
    return {mid + rad, mid - rad};
}

/// Trigonometric solution of the characteristic cubic of a symmetric 3x3.
inline std::vector<double> eig3_closed_form(const Matrix& s) {
    const double p1 = s(0, 1) * s(0, 1) + s(0, 2) * s(0, 2) + s(1, 2) * s(1, 2);
    const double q = (s(0, 0) + s(1, 1) + s(2, 2)) / 3.0;
    const double p2 = (s(0, 0) - q) * (s(0, 0) - q) + (s(1, 1) - q) * (s(1, 1) - q) + (s(2, 2) - q) * (s(2, 2) - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    Matrix b = (s - q * Matrix::Identity(3, 3)) / p;
    double r = cofactor_det(b) / 2.0;
    r = std::clamp(r, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double pi = std::acos(-1.0);
    const double e1 = q + 2.0 * p * std::cos(phi);
    const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * pi / 3.0);
    const double e2 = 3.0 * q - e1 - e3;
    std::vector<double> out{e1, e2, e3};
    std::sort(out.rbegin(), out.rend());
    return out;
}

/// ConvexLDA cost from its definition with explicit loops: the pull term as
/// a sum of squared projected residuals, the log-det from a cofactor
/// determinant of A^T C C^T A + gamma I.
inline std::pair<double, double> cost_reference(const Matrix& x, const std::vector<int>& labels, const Matrix& a,
                                                double gamma) {
    const Index d = x.rows(), n = x.cols(), p = a.cols();
    const int m = *std::max_element(labels.begin(), labels.end()) + 1;
    Matrix cent = Matrix::Zero(d, m);
    std::vector<double> count(static_cast<std::size_t>(m), 0.0);
    for (Index i = 0; i < n; ++i) {
        const int l = labels[static_cast<std::size_t>(i)];
        count[static_cast<std::size_t>(l)] += 1.0;
        for (Index r = 0; r < d; ++r) cent(r, l) += x(r, i);
    }
    for (int j = 0; j < m; ++j)
        for (Index r = 0; r < d; ++r) cent(r, j) /= count[static_cast<std::size_t>(j)];
    double l1 = 0.0;
    for (Index i = 0; i < n; ++i) {
        for (Index c = 0; c < p; ++c) {
            double proj = 0.0;
            for (Index r = 0; r < d; ++r) proj += a(r, c) * (cent(r, labels[static_cast<std::size_t>(i)]) - x(r, i));
            l1 += proj * proj;
        }
    }
    Matrix g = Matrix::Zero(p, p);
    for (int j = 0; j < m; ++j) {
        for (Index u = 0; u < p; ++u) {
            for (Index v = 0; v < p; ++v) {
                double pu = 0.0, pv = 0.0;
                for (Index r = 0; r < d; ++r) {
                    pu += a(r, u) * cent(r, j);
                    pv += a(r, v) * cent(r, j);
                }
                g(u, v) += pu * pv;
            }
        }
    }
    for (Index u = 0; u < p; ++u) g(u, u) += gamma;
    return {l1, -std::log(cofactor_det(g))};
}

/// Central differences of the total cost with step h, compared entrywise
/// with `analytic`. Each entry's error is taken relative to the larger of
/// its own magnitude and 1e-3 of the gradient's max-norm, so entries that
/// are zero up to rounding are judged on the gradient's scale.
template <typename CostFn>
double fd_max_rel_error(const CostFn& cost_fn, const Matrix& a, const Matrix& analytic, double h = 1e-6) {
    const double scale = analytic.cwiseAbs().maxCoeff();
    double worst = 0.0;
    for (Index j = 0; j < a.cols(); ++j) {
        for (Index i = 0; i < a.rows(); ++i) {
            Matrix plus = a, minus = a;
            plus(i, j) += h;
            minus(i, j) -= h;
            const double fd = (cost_fn(plus) - cost_fn(minus)) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(analytic(i, j)), 1e-3 * scale, 1e-300});
            worst = std::max(worst, std::abs(fd - analytic(i, j)) / denom);
        }
    }
    return worst;
}

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("convexlda_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testsupport
