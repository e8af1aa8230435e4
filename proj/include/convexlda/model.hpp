#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "convexlda/error.hpp"
#include "convexlda/linalg.hpp"

namespace convexlda {

enum class Method { convexlda, fisher_lda, pca };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::convexlda: return "convexlda";
        case Method::fisher_lda: return "fisher_lda";
        case Method::pca: return "pca";
    }
    return "unknown";
}

inline Method method_from_string(const std::string& s) {
    if (s == "convexlda") return Method::convexlda;
    if (s == "fisher_lda" || s == "fisher") return Method::fisher_lda;
    if (s == "pca") return Method::pca;
    throw ValidationError("unknown method '" + s + "' (expected convexlda, fisher_lda or pca)");
}

struct FitDiagnostics {
    double final_cost = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
    int iterations = 0;
    bool converged = false;
    bool line_search_failed = false;
    std::string stop_reason;
    std::vector<double> cost_trace;  // cost after each accepted step, starting with the initial cost
};

/// Input transform recorded with a model and replayed by transform().
struct Preprocessing {
    enum class Kind { none, standardize, pca };

    Kind kind = Kind::none;
    Vector mean;   // standardize, pca
    Vector scale;  // standardize
    Matrix basis;  // pca: d x k, orthonormal columns
    double variance_kept = 0.0;

    Index input_dim() const {
        switch (kind) {
            case Kind::none: return -1;
            case Kind::standardize: return mean.size();
            case Kind::pca: return basis.rows();
        }
        return -1;
    }

    Index output_dim() const {
        switch (kind) {
            case Kind::none: return -1;
            case Kind::standardize: return mean.size();
            case Kind::pca: return basis.cols();
        }
        return -1;
    }

    Matrix apply(const Matrix& x) const {
        switch (kind) {
            case Kind::none:
                return x;
            case Kind::standardize: {
                if (x.rows() != mean.size()) throw ShapeError("standardize: feature count mismatch");
                Matrix out = x.colwise() - mean;
                return scale.cwiseInverse().asDiagonal() * out;
            }
            case Kind::pca: {
                if (x.rows() != basis.rows()) throw ShapeError("pca preprocessing: feature count mismatch");
                return basis.transpose() * (x.colwise() - mean);
            }
        }
        return x;
    }
};

struct ModelParams {
    double lambda = 0.0;
    double gamma = 0.0;
    double ridge = 0.0;
    double variance_kept = 0.0;
    std::uint64_t seed = 0;
};

/// A learned d x p linear map plus everything needed to replay it.
struct ProjectionModel {
    Matrix A;
    Method method = Method::convexlda;
    ModelParams params;
    std::optional<Vector> train_mean;  // centered before projecting (PCA)
    std::vector<std::string> class_names;
    FitDiagnostics diagnostics;
    Preprocessing preprocessing;

    Index dim() const { return A.rows(); }
    Index embedding_dim() const { return A.cols(); }

    /// Row count expected from raw input passed to transform().
    Index input_dim() const {
        return preprocessing.kind == Preprocessing::Kind::none ? A.rows() : preprocessing.input_dim();
    }
};

/// Returns A^T x for each column x of `x`, after replaying preprocessing and
/// centering by the stored training mean.
inline Matrix transform(const ProjectionModel& model, const Matrix& x) {
    if (x.rows() != model.input_dim()) {
        throw ShapeError("transform: input has " + std::to_string(x.rows()) + " features, model expects " +
                         std::to_string(model.input_dim()));
    }
    Matrix z = model.preprocessing.apply(x);
    if (model.train_mean) {
        z = z.colwise() - *model.train_mean;
    }
    return model.A.transpose() * z;
}

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline nlohmann::json vector_to_json(const Vector& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline Matrix matrix_from_json(const nlohmann::json& j, Index rows, Index cols, const std::string& what) {
    if (!j.is_array() || static_cast<Index>(j.size()) != rows) {
        throw ValidationError(what + ": expected " + std::to_string(rows) + " rows");
    }
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
            throw ValidationError(what + ": row " + std::to_string(i) + " does not have " + std::to_string(cols) +
                                  " entries");
        }
        for (Index c = 0; c < cols; ++c) {
            const auto& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) throw ValidationError(what + ": non-numeric entry");
            m(i, c) = v.get<double>();
        }
    }
    require_finite(m, what);
    return m;
}

inline Vector vector_from_json(const nlohmann::json& j, Index size, const std::string& what) {
    if (!j.is_array() || static_cast<Index>(j.size()) != size) {
        throw ValidationError(what + ": expected " + std::to_string(size) + " entries");
    }
    Vector v(size);
    for (Index i = 0; i < size; ++i) {
        const auto& e = j[static_cast<std::size_t>(i)];
        if (!e.is_number()) throw ValidationError(what + ": non-numeric entry");
        v(i) = e.get<double>();
    }
    require_finite(v, what);
    return v;
}

}  // namespace detail

inline nlohmann::json to_json(const Preprocessing& p) {
    nlohmann::json out;
    switch (p.kind) {
        case Preprocessing::Kind::none:
            out["type"] = "none";
            out["parameters"] = nlohmann::json::object();
            break;
        case Preprocessing::Kind::standardize:
            out["type"] = "standardize";
            out["parameters"] = {{"mean", detail::vector_to_json(p.mean)}, {"std", detail::vector_to_json(p.scale)}};
            break;
        case Preprocessing::Kind::pca:
            out["type"] = "pca";
            out["parameters"] = {{"variance_kept", p.variance_kept},
                                 {"d", p.basis.rows()},
                                 {"k", p.basis.cols()},
                                 {"mean", detail::vector_to_json(p.mean)},
                                 {"basis", detail::matrix_to_json(p.basis)}};
            break;
    }
    return out;
}

inline Preprocessing preprocessing_from_json(const nlohmann::json& j) {
    Preprocessing p;
    const std::string type = j.value("type", "none");
    const auto& params = j.contains("parameters") ? j["parameters"] : nlohmann::json::object();
    if (type == "none") return p;
    if (type == "standardize") {
        p.kind = Preprocessing::Kind::standardize;
        const auto d = static_cast<Index>(params.at("mean").size());
        p.mean = detail::vector_from_json(params.at("mean"), d, "preprocessing.mean");
        p.scale = detail::vector_from_json(params.at("std"), d, "preprocessing.std");
        if ((p.scale.array() <= 0.0).any()) throw ValidationError("preprocessing.std must be positive");
        return p;
    }
    if (type == "pca") {
        p.kind = Preprocessing::Kind::pca;
        const Index d = params.at("d").get<Index>();
        const Index k = params.at("k").get<Index>();
        if (d < 1 || k < 1) throw ValidationError("preprocessing: invalid pca shape");
        p.variance_kept = params.value("variance_kept", 0.0);
        p.mean = detail::vector_from_json(params.at("mean"), d, "preprocessing.mean");
        p.basis = detail::matrix_from_json(params.at("basis"), d, k, "preprocessing.basis");
        return p;
    }
    throw ValidationError("unknown preprocessing type '" + type + "'");
}

inline nlohmann::json to_json(const ProjectionModel& m) {
    nlohmann::json out;
    out["method"] = to_string(m.method);
    out["d"] = m.A.rows();
    out["p"] = m.A.cols();
    out["lambda"] = m.params.lambda;
    out["gamma"] = m.params.gamma;
    out["ridge"] = m.params.ridge;
    out["seed"] = m.params.seed;
    if (m.method == Method::pca) out["variance_kept"] = m.params.variance_kept;
    out["A"] = detail::matrix_to_json(m.A);
    if (m.train_mean) out["train_mean"] = detail::vector_to_json(*m.train_mean);
    out["class_names"] = m.class_names;
    out["diagnostics"] = {{"final_cost", m.diagnostics.final_cost},
                          {"L1", m.diagnostics.l1},
                          {"L2", m.diagnostics.l2},
                          {"iterations", m.diagnostics.iterations},
                          {"converged", m.diagnostics.converged},
                          {"line_search_failed", m.diagnostics.line_search_failed},
                          {"stop_reason", m.diagnostics.stop_reason}};
    out["preprocessing"] = to_json(m.preprocessing);
    return out;
}

/// Parses and validates a serialized model (shape and finiteness).
inline ProjectionModel model_from_json(const nlohmann::json& j) {
    try {
        ProjectionModel m;
        m.method = method_from_string(j.at("method").get<std::string>());
        const Index d = j.at("d").get<Index>();
        const Index p = j.at("p").get<Index>();
        if (d < 1 || p < 1) throw ValidationError("model: d and p must be >= 1");
        m.A = detail::matrix_from_json(j.at("A"), d, p, "model.A");
        m.params.lambda = j.value("lambda", 0.0);
        m.params.gamma = j.value("gamma", 0.0);
        m.params.ridge = j.value("ridge", 0.0);
        m.params.seed = j.value("seed", std::uint64_t{0});
        m.params.variance_kept = j.value("variance_kept", 0.0);
        if (j.contains("train_mean")) m.train_mean = detail::vector_from_json(j["train_mean"], d, "model.train_mean");
        if (j.contains("class_names")) m.class_names = j["class_names"].get<std::vector<std::string>>();
        if (j.contains("diagnostics")) {
            const auto& dj = j["diagnostics"];
            m.diagnostics.final_cost = dj.value("final_cost", 0.0);
            m.diagnostics.l1 = dj.value("L1", 0.0);
            m.diagnostics.l2 = dj.value("L2", 0.0);
            m.diagnostics.iterations = dj.value("iterations", 0);
            m.diagnostics.converged = dj.value("converged", false);
            m.diagnostics.line_search_failed = dj.value("line_search_failed", false);
            m.diagnostics.stop_reason = dj.value("stop_reason", std::string{});
        }
        if (j.contains("preprocessing")) m.preprocessing = preprocessing_from_json(j["preprocessing"]);
        if (m.preprocessing.kind != Preprocessing::Kind::none && m.preprocessing.output_dim() != d) {
            throw ValidationError("model: preprocessing output dimension does not match d");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("model JSON: ") + e.what());
    }
}

}  // namespace convexlda
