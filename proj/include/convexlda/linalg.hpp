#pragma once

// Dense kernels shared by every model: symmetric eigendecomposition, SPD
// factor/solve, log-determinant and seeded orthonormal initialization.
// Backed by Eigen; all functions are pure and single-threaded so results are
// bitwise reproducible for identical inputs.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>

#include "convexlda/error.hpp"

namespace convexlda {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_nonempty(const Matrix& m, std::string_view what) {
    if (m.rows() < 1 || m.cols() < 1) {
        throw ShapeError(std::string(what) + ": empty matrix (" + shape_str(m) + ")");
    }
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, std::string_view what) {
    if (!m.allFinite()) {
        throw ValidationError(std::string(what) + ": contains NaN or Inf");
    }
}

inline void require_square(const Matrix& m, std::string_view what) {
    require_nonempty(m, what);
    if (m.rows() != m.cols()) {
        throw ShapeError(std::string(what) + ": expected a square matrix, got " + shape_str(m));
    }
}

/// Largest absolute entry, 0 for an empty matrix.
inline double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Rejects asymmetry beyond `rel_tol * max|S|` and returns (S + S^T) / 2.
inline Matrix symmetrized(const Matrix& s, std::string_view what, double rel_tol = 1e-10) {
    require_square(s, what);
    require_finite(s, what);
    const double asym = max_abs(s - s.transpose());
    if (asym > rel_tol * max_abs(s)) {
        throw ShapeError(std::string(what) + ": matrix is not symmetric (max |S - S^T| = " +
                         std::to_string(asym) + ")");
    }
    return 0.5 * (s + s.transpose());
}

struct SymEigResult {
    Vector eigenvalues;   // descending
    Matrix eigenvectors;  // column i pairs with eigenvalues(i)
};

inline SymEigResult sym_eig(const Matrix& s) {
    const Matrix sym = symmetrized(s, "sym_eig");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) {
        throw NumericError("sym_eig: eigensolver did not converge for a " + shape_str(sym) + " matrix");
    }
    // Eigen returns ascending order.
    const Index n = sym.rows();
    SymEigResult out{Vector(n), Matrix(n, n)};
    for (Index i = 0; i < n; ++i) {
        out.eigenvalues(i) = solver.eigenvalues()(n - 1 - i);
        out.eigenvectors.col(i) = solver.eigenvectors().col(n - 1 - i);
    }
    return out;
}

/// Cholesky factor of a symmetric positive definite matrix. A pivot below
/// `n * eps * max diag(M)` counts as a failure: for a singular M the plain
/// LLT can otherwise succeed on rounding noise.
class SpdFactor {
public:
    explicit SpdFactor(const Matrix& m, std::string_view hint = {}) {
        require_square(m, "spd_factor");
        require_finite(m, "spd_factor");
        llt_.compute(m);
        const double max_diag = m.diagonal().cwiseAbs().maxCoeff();
        const double floor = static_cast<double>(m.rows()) * std::numeric_limits<double>::epsilon() * max_diag;
        bool ok = llt_.info() == Eigen::Success;
        if (ok) {
            const auto l = llt_.matrixL();
            for (Index i = 0; i < m.rows(); ++i) {
                const double pivot = l(i, i) * l(i, i);
                if (!(pivot > floor) || !std::isfinite(pivot)) {
                    ok = false;
                    break;
                }
            }
        }
        if (!ok) {
            std::string msg = "matrix of size " + shape_str(m) + " is not numerically positive definite";
            if (!hint.empty()) {
                msg += "; ";
                msg += hint;
            }
            throw NumericError(msg);
        }
    }

    Index size() const { return llt_.rows(); }

    Matrix solve(const Matrix& b) const {
        if (b.rows() != size()) {
            throw ShapeError("spd solve: right-hand side has " + std::to_string(b.rows()) +
                             " rows, expected " + std::to_string(size()));
        }
        return llt_.solve(b);
    }

    /// log det M = 2 * sum(log L_ii).
    double logdet() const {
        const auto l = llt_.matrixL();
        double acc = 0.0;
        for (Index i = 0; i < size(); ++i) acc += std::log(l(i, i));
        return 2.0 * acc;
    }

    /// Lower-triangular factor L with M = L L^T.
    Matrix lower() const { return llt_.matrixL(); }

private:
    Eigen::LLT<Matrix> llt_;
};

/// Solves M Z = B for SPD M without forming M^{-1}.
inline Matrix spd_factor_solve(const Matrix& m, const Matrix& b, std::string_view hint = "increase gamma") {
    return SpdFactor(m, hint).solve(b);
}

inline double logdet_spd(const Matrix& m, std::string_view hint = "increase gamma") {
    return SpdFactor(m, hint).logdet();
}

/// Seeded Gaussian draw followed by Householder QR. Column signs follow the
/// sign of R's diagonal so the result is unique for a given draw.
inline Matrix orthonormal_init(Index rows, Index cols, std::uint64_t seed) {
    if (rows < 1 || cols < 1) {
        throw ShapeError("orthonormal_init: rows and cols must be >= 1");
    }
    if (cols > rows) {
        throw ShapeError("orthonormal_init: cols (" + std::to_string(cols) + ") exceeds rows (" +
                         std::to_string(rows) + ")");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix g(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) g(i, j) = normal(rng);

    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
    const Matrix& r = qr.matrixQR();
    for (Index j = 0; j < cols; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q;
}

}  // namespace convexlda
