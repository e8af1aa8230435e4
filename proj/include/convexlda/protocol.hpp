#pragma once

// Evaluation protocols built from the fitting routines: repeated stratified
// train/test runs, cross-validated lambda tuning and lambda sweeps. Inner
// fits may run on worker threads; every task derives its state from its own
// index and results are assembled in index order, so the thread count never
// changes the output.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "convexlda/core.hpp"
#include "convexlda/dataset.hpp"
#include "convexlda/fisher.hpp"
#include "convexlda/io.hpp"
#include "convexlda/metrics.hpp"
#include "convexlda/model.hpp"
#include "convexlda/pca.hpp"

namespace convexlda {

/// Runs fn(0..count-1) on up to `threads` workers. The first exception (by
/// task index) is rethrown after all workers finish.
inline void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n_workers = std::min(threads, count);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// Worker count from CONVEXLDA_THREADS, defaulting to 1.
inline std::size_t default_threads() {
    if (const char* env = std::getenv("CONVEXLDA_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
    }
    return 1;
}

/// A method together with everything needed to fit it on a training set.
struct MethodSpec {
    Method method = Method::convexlda;
    Index dim = 2;
    double lambda = 1.0;
    double gamma = 1e-6;
    OptimizerConfig optimizer;
    std::optional<double> ridge;         // fisher_lda
    std::optional<double> pca_variance;  // PCA fitted on the training data first
    bool standardize = false;
};

inline nlohmann::json to_json(const MethodSpec& s) {
    nlohmann::json j;
    j["method"] = to_string(s.method);
    j["dim"] = s.dim;
    if (s.method == Method::convexlda) {
        j["lambda"] = s.lambda;
        j["gamma"] = s.gamma;
        j["optimizer"] = {{"max_iters", s.optimizer.max_iters},       {"rel_tol", s.optimizer.rel_tol},
                          {"grad_tol", s.optimizer.grad_tol},         {"initial_step", s.optimizer.initial_step},
                          {"armijo_c", s.optimizer.armijo_c},         {"backtrack_factor", s.optimizer.backtrack_factor}};
    }
    if (s.method == Method::fisher_lda) j["ridge"] = s.ridge ? nlohmann::json(*s.ridge) : nlohmann::json("default");
    j["pca_variance"] = s.pca_variance ? nlohmann::json(*s.pca_variance) : nlohmann::json(nullptr);
    j["standardize"] = s.standardize;
    return j;
}

/// Fits `spec` on `train`. Preprocessing (standardization or PCA) is
/// estimated on `train` only and stored in the returned model.
inline ProjectionModel fit_method(const Dataset& train, const MethodSpec& spec, std::uint64_t seed) {
    if (spec.standardize && spec.pca_variance) {
        throw ValidationError("fit: standardization and PCA preprocessing are mutually exclusive");
    }
    Preprocessing prep;
    Dataset work = train;
    if (spec.standardize) {
        auto [scaled, mean, stddev] = standardize(train);
        prep.kind = Preprocessing::Kind::standardize;
        prep.mean = std::move(mean);
        prep.scale = std::move(stddev);
        work = std::move(scaled);
    } else if (spec.pca_variance) {
        auto [reduced, pca_model] = pca_reduce(train, *spec.pca_variance);
        prep = pca_preprocessing(pca_model);
        work = std::move(reduced);
    }

    ProjectionModel model;
    switch (spec.method) {
        case Method::convexlda: {
            OptimizerConfig opt = spec.optimizer;
            opt.seed = seed;
            model = fit_convexlda(work, ConvexLdaParams{spec.dim, spec.lambda, spec.gamma}, opt);
            break;
        }
        case Method::fisher_lda:
            model = fit_fisher(work, FisherLdaParams{spec.dim, spec.ridge});
            break;
        case Method::pca: {
            auto [reduced, pca_model] = pca_reduce(work, 1.0);
            if (pca_model.A.cols() < spec.dim) {
                throw ValidationError("pca: data rank " + std::to_string(pca_model.A.cols()) +
                                      " is below the requested dimension " + std::to_string(spec.dim));
            }
            pca_model.A = pca_model.A.leftCols(spec.dim).eval();
            model = std::move(pca_model);
            break;
        }
    }
    model.preprocessing = std::move(prep);
    model.class_names = train.class_names;
    return model;
}

// ------------------------------------------------------- run_protocol ----

struct RepeatResult {
    std::uint64_t seed = 0;
    std::optional<double> accuracy;  // empty when the repeat failed
    std::string error;
};

struct EvalReport {
    MethodSpec method;
    double split_fraction = 0.8;
    int k_nn = 5;
    int repeats = 1;
    std::uint64_t base_seed = 0;
    std::vector<RepeatResult> per_repeat;
    std::vector<double> per_repeat_accuracy;  // successful repeats, repeat order
    std::vector<std::uint64_t> seeds;
    double mean_accuracy = std::nan("");
    double std_accuracy = std::nan("");
    bool partial = false;
};

/// Mean and sample standard deviation, accumulated over the sorted values
/// so the result does not depend on the order repeats finished in.
inline std::pair<double, double> mean_and_std(std::vector<double> values) {
    if (values.empty()) return {std::nan(""), std::nan("")};
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

/// Accuracy of one stratified split: fit on train, embed both parts, k-NN on test.
inline double split_accuracy(const Dataset& ds, const MethodSpec& spec, double split_fraction, int k_nn, std::uint64_t seed) {
    const SplitPlan plan = stratified_split(ds, split_fraction, seed);
    if (plan.test_indices.empty()) throw ValidationError("protocol: split leaves no test samples");
    const Dataset train = ds.subset(plan.train_indices);
    const Dataset test = ds.subset(plan.test_indices);
    const ProjectionModel model = fit_method(train, spec, seed);
    const Matrix z_train = transform(model, train.X);
    const Matrix z_test = transform(model, test.X);
    const auto predicted = knn_predict(z_train, train.labels, z_test, k_nn);
    return accuracy(predicted, test.labels);
}

/// Repeat r uses seed base_seed + r for both the split and the initialization.
inline EvalReport run_protocol(const Dataset& ds, const MethodSpec& spec, double split_fraction, int k_nn, int repeats,
                               std::uint64_t base_seed, std::size_t threads = 1) {
    ds.validate_for_fit();
    if (repeats < 1) throw ValidationError("protocol: repeats must be >= 1");
    if (k_nn < 1) throw ValidationError("protocol: k must be >= 1");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ValidationError("protocol: split must lie in (0, 1)");

    EvalReport report;
    report.method = spec;
    report.split_fraction = split_fraction;
    report.k_nn = k_nn;
    report.repeats = repeats;
    report.base_seed = base_seed;
    report.per_repeat.resize(static_cast<std::size_t>(repeats));

    parallel_for(static_cast<std::size_t>(repeats), threads, [&](std::size_t r) {
        RepeatResult& out = report.per_repeat[r];
        out.seed = base_seed + r;
        try {
            out.accuracy = split_accuracy(ds, spec, split_fraction, k_nn, out.seed);
        } catch (const Error& e) {
            out.error = e.what();
        }
    });

    for (const auto& r : report.per_repeat) {
        report.seeds.push_back(r.seed);
        if (r.accuracy) {
            report.per_repeat_accuracy.push_back(*r.accuracy);
        } else {
            report.partial = true;
        }
    }
    std::tie(report.mean_accuracy, report.std_accuracy) = mean_and_std(report.per_repeat_accuracy);
    return report;
}

namespace detail {
inline nlohmann::json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}
}  // namespace detail

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j;
    j["protocol"] = {{"split_fraction", r.split_fraction},
                     {"k_nn", r.k_nn},
                     {"repeats", r.repeats},
                     {"embedding_dim", r.method.dim},
                     {"base_seed", r.base_seed}};
    j["method"] = to_json(r.method);
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& rep : r.per_repeat) {
        nlohmann::json e;
        e["seed"] = rep.seed;
        e["accuracy"] = rep.accuracy ? nlohmann::json(*rep.accuracy) : nlohmann::json(nullptr);
        if (!rep.error.empty()) e["error"] = rep.error;
        reps.push_back(std::move(e));
    }
    j["repeats"] = std::move(reps);
    j["per_repeat_accuracy"] = r.per_repeat_accuracy;
    j["seeds"] = r.seeds;
    j["mean_accuracy"] = detail::number_or_null(r.mean_accuracy);
    j["std_accuracy"] = detail::number_or_null(r.std_accuracy);
    j["partial"] = r.partial;
    return j;
}

// -------------------------------------------------------- tune_lambda ----

struct TunePoint {
    double lambda = 0.0;
    double mean_accuracy = 0.0;
    std::vector<double> fold_accuracy;
    bool refined = false;  // from the linear refinement phase
};

struct TuneResult {
    double best_lambda = 0.0;
    double best_accuracy = 0.0;
    std::vector<TunePoint> curve;  // sorted by lambda
};

inline std::vector<double> default_lambda_grid() { return {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3}; }

inline void require_increasing_lambdas(const std::vector<double>& lambdas, const char* what) {
    if (lambdas.empty()) throw ValidationError(std::string(what) + ": lambda list is empty");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] > 0.0) || !std::isfinite(lambdas[i])) {
            throw ValidationError(std::string(what) + ": lambdas must be finite and > 0");
        }
        if (i > 0 && !(lambdas[i] > lambdas[i - 1])) {
            throw ValidationError(std::string(what) + ": lambdas must be strictly increasing");
        }
    }
}

/// Highest accuracy; ties go to the smaller lambda. `curve` must be sorted.
inline std::size_t best_point(const std::vector<TunePoint>& curve) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (curve[i].mean_accuracy > curve[best].mean_accuracy) best = i;
    }
    return best;
}

/// Two-phase search for lambda by stratified k-fold CV k-NN accuracy: the
/// log-spaced grid first, then `refine_steps` evenly spaced values spanning
/// the grid neighbours of the best grid point.
inline TuneResult tune_lambda(const Dataset& train, const MethodSpec& base, int folds, int k_nn,
                              const std::vector<double>& log_grid, int refine_steps, std::uint64_t seed,
                              std::size_t threads = 1) {
    train.validate_for_fit();
    if (base.method != Method::convexlda) throw ValidationError("tune_lambda: only convexlda has a lambda");
    if (folds < 2) throw ValidationError("tune_lambda: folds must be >= 2");
    if (refine_steps < 0) throw ValidationError("tune_lambda: refine_steps must be >= 0");
    require_increasing_lambdas(log_grid, "tune_lambda");
    const auto plans = kfold_indices(train.size(), train.labels, folds, seed);

    auto evaluate = [&](const std::vector<double>& lambdas, bool refined) {
        std::vector<TunePoint> points(lambdas.size());
        const std::size_t n_folds = plans.size();
        std::vector<double> acc(lambdas.size() * n_folds, 0.0);
        parallel_for(acc.size(), threads, [&](std::size_t task) {
            const std::size_t li = task / n_folds;
            const std::size_t fi = task % n_folds;
            const SplitPlan& plan = plans[fi];
            const Dataset fit_part = train.subset(plan.train_indices);
            const Dataset held_out = train.subset(plan.test_indices);
            MethodSpec spec = base;
            spec.lambda = lambdas[li];
            const ProjectionModel model = fit_method(fit_part, spec, seed + fi);
            const auto predicted =
                knn_predict(transform(model, fit_part.X), fit_part.labels, transform(model, held_out.X), k_nn);
            acc[task] = accuracy(predicted, held_out.labels);
        });
        for (std::size_t li = 0; li < lambdas.size(); ++li) {
            TunePoint& pt = points[li];
            pt.lambda = lambdas[li];
            pt.refined = refined;
            double sum = 0.0;
            for (std::size_t fi = 0; fi < n_folds; ++fi) {
                pt.fold_accuracy.push_back(acc[li * n_folds + fi]);
                sum += acc[li * n_folds + fi];
            }
            pt.mean_accuracy = sum / static_cast<double>(n_folds);
        }
        return points;
    };

    TuneResult result;
    result.curve = evaluate(log_grid, false);
    const std::size_t best_grid = best_point(result.curve);

    if (refine_steps >= 2 && log_grid.size() > 1) {
        const double lo = log_grid[best_grid == 0 ? 0 : best_grid - 1];
        const double hi = log_grid[std::min(best_grid + 1, log_grid.size() - 1)];
        std::vector<double> fine;
        for (int s = 0; s < refine_steps; ++s) {
            const double v = lo + (hi - lo) * static_cast<double>(s) / static_cast<double>(refine_steps - 1);
            if (std::find(log_grid.begin(), log_grid.end(), v) == log_grid.end()) fine.push_back(v);
        }
        if (!fine.empty()) {
            auto extra = evaluate(fine, true);
            result.curve.insert(result.curve.end(), extra.begin(), extra.end());
            std::stable_sort(result.curve.begin(), result.curve.end(),
                             [](const TunePoint& a, const TunePoint& b) { return a.lambda < b.lambda; });
        }
    }
    const std::size_t best = best_point(result.curve);
    result.best_lambda = result.curve[best].lambda;
    result.best_accuracy = result.curve[best].mean_accuracy;
    return result;
}

inline nlohmann::json to_json(const TuneResult& t) {
    nlohmann::json j;
    j["best_lambda"] = t.best_lambda;
    j["best_accuracy"] = t.best_accuracy;
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : t.curve) {
        curve.push_back({{"lambda", p.lambda},
                         {"mean_accuracy", p.mean_accuracy},
                         {"fold_accuracy", p.fold_accuracy},
                         {"phase", p.refined ? "linear" : "log"}});
    }
    j["curve"] = std::move(curve);
    return j;
}

// ------------------------------------------------------- sweep_lambda ----

struct PairValue {
    int a = 0;
    int b = 0;
    double value = 0.0;
};

struct SweepRecord {
    double lambda = 0.0;
    bool ok = false;
    std::string error;
    CostTerms cost;
    int iterations = 0;
    bool converged = false;
    std::vector<double> class_scatter;   // per class
    std::vector<PairValue> msd;          // unordered pairs a < b
    std::vector<PairValue> hausdorff;    // ordered pairs a != b, directed a -> b
};

struct LambdaSweepReport {
    Index p = 2;
    std::vector<double> lambdas;
    std::vector<std::string> class_names;
    std::vector<SweepRecord> per_lambda;
};

/// Embedding statistics of `z` grouped by label.
inline void fill_separation_metrics(SweepRecord& rec, const Matrix& z, std::span<const int> labels, int n_classes) {
    const auto groups = split_by_class(z, labels, n_classes);
    rec.class_scatter.clear();
    rec.msd.clear();
    rec.hausdorff.clear();
    for (int c = 0; c < n_classes; ++c) rec.class_scatter.push_back(class_scatter(groups[static_cast<std::size_t>(c)]));
    for (int a = 0; a < n_classes; ++a)
        for (int b = a + 1; b < n_classes; ++b)
            rec.msd.push_back({a, b, mean_set_distance(groups[static_cast<std::size_t>(a)], groups[static_cast<std::size_t>(b)])});
    for (int a = 0; a < n_classes; ++a)
        for (int b = 0; b < n_classes; ++b)
            if (a != b) {
                rec.hausdorff.push_back(
                    {a, b, directed_hausdorff(groups[static_cast<std::size_t>(a)], groups[static_cast<std::size_t>(b)])});
            }
}

/// Fits ConvexLDA on the full dataset for each lambda (same initialization
/// seed throughout) and records the sub-costs and separation metrics.
inline LambdaSweepReport sweep_lambda(const Dataset& ds, Index p, const std::vector<double>& lambdas,
                                      const OptimizerConfig& opt, double gamma = 1e-6, std::size_t threads = 1) {
    ds.validate_for_fit();
    require_increasing_lambdas(lambdas, "sweep_lambda");
    LambdaSweepReport report;
    report.p = p;
    report.lambdas = lambdas;
    for (int c = 0; c < ds.num_classes(); ++c) report.class_names.push_back(ds.class_name(c));
    report.per_lambda.resize(lambdas.size());

    parallel_for(lambdas.size(), threads, [&](std::size_t i) {
        SweepRecord& rec = report.per_lambda[i];
        rec.lambda = lambdas[i];
        try {
            const ProjectionModel model = fit_convexlda(ds, ConvexLdaParams{p, lambdas[i], gamma}, opt);
            rec.cost = {model.diagnostics.final_cost, model.diagnostics.l1, model.diagnostics.l2};
            rec.iterations = model.diagnostics.iterations;
            rec.converged = model.diagnostics.converged;
            fill_separation_metrics(rec, transform(model, ds.X), ds.labels, ds.num_classes());
            rec.ok = true;
        } catch (const Error& e) {
            rec.error = e.what();
        }
    });
    return report;
}

inline nlohmann::json to_json(const LambdaSweepReport& r) {
    nlohmann::json j;
    j["p"] = r.p;
    j["lambdas"] = r.lambdas;
    j["class_names"] = r.class_names;
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& rec : r.per_lambda) {
        nlohmann::json e;
        e["lambda"] = rec.lambda;
        e["ok"] = rec.ok;
        if (!rec.ok) {
            e["error"] = rec.error;
            recs.push_back(std::move(e));
            continue;
        }
        e["cost"] = rec.cost.total;
        e["L1"] = rec.cost.l1;
        e["L2"] = rec.cost.l2;
        e["iterations"] = rec.iterations;
        e["converged"] = rec.converged;
        e["class_scatter"] = rec.class_scatter;
        nlohmann::json msd = nlohmann::json::array();
        for (const auto& pv : rec.msd) msd.push_back({{"a", pv.a}, {"b", pv.b}, {"value", pv.value}});
        e["mean_set_distance"] = std::move(msd);
        nlohmann::json hd = nlohmann::json::array();
        for (const auto& pv : rec.hausdorff) hd.push_back({{"from", pv.a}, {"to", pv.b}, {"value", pv.value}});
        e["directed_hausdorff"] = std::move(hd);
        recs.push_back(std::move(e));
    }
    j["per_lambda"] = std::move(recs);
    return j;
}

/// One row per lambda x metric x class/pair: lambda,metric,class_a,class_b,value.
/// The symmetric Hausdorff distance is emitted as its own labeled metric.
inline std::string sweep_csv(const LambdaSweepReport& r) {
    std::string out = "lambda,metric,class_a,class_b,value\n";
    auto row = [&](double lambda, const char* metric, const std::string& a, const std::string& b, double v) {
        out += format_double(lambda) + "," + metric + "," + a + "," + b + "," + format_double(v) + "\n";
    };
    auto name = [&](int c) { return r.class_names[static_cast<std::size_t>(c)]; };
    for (const auto& rec : r.per_lambda) {
        if (!rec.ok) continue;
        row(rec.lambda, "cost", "", "", rec.cost.total);
        row(rec.lambda, "L1", "", "", rec.cost.l1);
        row(rec.lambda, "L2", "", "", rec.cost.l2);
        for (std::size_t c = 0; c < rec.class_scatter.size(); ++c) row(rec.lambda, "CS", name(static_cast<int>(c)), "", rec.class_scatter[c]);
        for (const auto& pv : rec.msd) row(rec.lambda, "MSD", name(pv.a), name(pv.b), pv.value);
        for (const auto& pv : rec.hausdorff) row(rec.lambda, "hausdorff_directed", name(pv.a), name(pv.b), pv.value);
        for (const auto& pv : rec.hausdorff) {
            if (pv.a > pv.b) continue;
            for (const auto& back : rec.hausdorff) {
                if (back.a == pv.b && back.b == pv.a) {
                    row(rec.lambda, "hausdorff_symmetric", name(pv.a), name(pv.b), std::max(pv.value, back.value));
                }
            }
        }
    }
    return out;
}

}  // namespace convexlda
