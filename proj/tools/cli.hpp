#pragma once

// Subcommand front end: fit, transform, eval, tune, sweep-lambda, synth and
// benchmark. Exit codes: 0 success, 1 validation/usage, 2 I/O, 3 numeric.

#include <charconv>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "convexlda/convexlda.hpp"

namespace convexlda::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kIo = 2, kNumeric = 3 };

struct RunConfig {
    std::string command;

    // dataset input
    std::string input;
    std::string label_col;
    std::string delimiter = ",";
    bool header = false;
    bool no_header = false;
    std::string idx_images;
    std::string idx_labels;
    bool idx_raw = false;
    std::string classes;

    // method
    std::string method = "convexlda";
    Index dim = 2;
    double lambda = 1.0;
    double gamma = 1e-6;
    std::optional<double> ridge;
    std::optional<double> pca_variance;
    bool standardize = false;
    OptimizerConfig optimizer;

    // protocols
    double split = 0.8;
    int knn = 5;
    int repeats = 20;
    int folds = 5;
    std::string grid = "1e-3,1e-2,1e-1,1,1e1,1e2,1e3";
    int refine = 10;
    std::string lambdas = "0.1,1,10,100";
    std::string methods = "convexlda,fisher_lda";
    std::string dims = "2,3";

    // synth
    int synth_classes = 5;
    Index synth_dim = 100;
    Index synth_n = 100;
    double synth_std = 20.0;
    double synth_mean_box = 50.0;

    // transform
    std::string model_path;

    std::uint64_t seed = 0;
    std::string out;
    std::string csv_out;
    std::size_t threads = 1;
};

inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::vector<double> parse_real_list(const std::string& text, const char* flag) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) {
        const auto v = parse_real(item);
        if (!v) throw ValidationError(std::string(flag) + ": cannot parse '" + item + "' as a number");
        out.push_back(*v);
    }
    if (out.empty()) throw ValidationError(std::string(flag) + ": empty list");
    return out;
}

inline std::vector<Index> parse_dim_list(const std::string& text) {
    std::vector<Index> out;
    for (const auto& item : split_list(text)) {
        Index v = 0;
        auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (res.ec != std::errc() || res.ptr != item.data() + item.size() || v < 1) {
            throw ValidationError("--dims: '" + item + "' is not a positive integer");
        }
        out.push_back(v);
    }
    if (out.empty()) throw ValidationError("--dims: empty list");
    return out;
}

inline Dataset load_input(const RunConfig& c) {
    Dataset ds;
    if (!c.idx_images.empty() || !c.idx_labels.empty()) {
        if (c.idx_images.empty() || c.idx_labels.empty()) {
            throw ValidationError("--idx-images and --idx-labels must be given together");
        }
        ds = load_idx(c.idx_images, c.idx_labels, IdxOptions{c.idx_raw});
    } else {
        if (c.input.empty()) throw ValidationError("an input dataset is required (--input or --idx-images/--idx-labels)");
        CsvOptions opts;
        if (c.delimiter.size() != 1) throw ValidationError("--delimiter must be a single character");
        opts.delimiter = c.delimiter == "\\t" ? '\t' : c.delimiter[0];
        if (c.header) opts.header = CsvOptions::Header::present;
        if (c.no_header) opts.header = CsvOptions::Header::absent;
        if (!c.label_col.empty()) {
            long idx = 0;
            auto res = std::from_chars(c.label_col.data(), c.label_col.data() + c.label_col.size(), idx);
            if (res.ec == std::errc() && res.ptr == c.label_col.data() + c.label_col.size()) {
                opts.label_column = idx;
            } else {
                opts.label_column = c.label_col;
            }
        }
        ds = read_dataset(c.input, opts);
    }
    if (!c.classes.empty()) ds = select_classes(ds, split_list(c.classes));
    return ds;
}

inline MethodSpec method_spec(const RunConfig& c) {
    MethodSpec s;
    s.method = method_from_string(c.method);
    s.dim = c.dim;
    s.lambda = c.lambda;
    s.gamma = c.gamma;
    s.optimizer = c.optimizer;
    s.optimizer.seed = c.seed;
    s.ridge = c.ridge;
    s.pca_variance = c.pca_variance;
    s.standardize = c.standardize;
    s.optimizer.validate();
    return s;
}

/// Everything that determines a command's output. Output paths and the
/// worker count are left out so a replay reproduces the same bytes.
inline nlohmann::json provenance(const RunConfig& c) {
    nlohmann::json cfg;
    auto opt_or_null = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    if (c.command != "synth") {
        cfg["input"] = c.input;
        cfg["label_col"] = c.label_col;
        cfg["delimiter"] = c.delimiter;
        cfg["header"] = c.header ? "present" : (c.no_header ? "absent" : "auto");
        cfg["idx_images"] = c.idx_images;
        cfg["idx_labels"] = c.idx_labels;
        cfg["idx_raw"] = c.idx_raw;
        cfg["classes"] = c.classes;
    }
    if (c.command == "fit" || c.command == "eval" || c.command == "tune" || c.command == "benchmark" ||
        c.command == "sweep-lambda") {
        cfg["method"] = c.method;
        cfg["dim"] = c.dim;
        cfg["lambda"] = c.lambda;
        cfg["gamma"] = c.gamma;
        cfg["ridge"] = opt_or_null(c.ridge);
        cfg["pca_variance"] = opt_or_null(c.pca_variance);
        cfg["standardize"] = c.standardize;
        cfg["optimizer"] = {{"max_iters", c.optimizer.max_iters},   {"rel_tol", c.optimizer.rel_tol},
                            {"grad_tol", c.optimizer.grad_tol},     {"initial_step", c.optimizer.initial_step},
                            {"armijo_c", c.optimizer.armijo_c},     {"backtrack_factor", c.optimizer.backtrack_factor}};
    }
    if (c.command == "eval" || c.command == "benchmark") {
        cfg["split"] = c.split;
        cfg["knn"] = c.knn;
        cfg["repeats"] = c.repeats;
    }
    if (c.command == "tune") {
        cfg["folds"] = c.folds;
        cfg["knn"] = c.knn;
        cfg["grid"] = c.grid;
        cfg["refine"] = c.refine;
    }
    if (c.command == "sweep-lambda") cfg["lambdas"] = c.lambdas;
    if (c.command == "benchmark") {
        cfg["methods"] = c.methods;
        cfg["dims"] = c.dims;
    }
    if (c.command == "synth") {
        cfg["classes"] = c.synth_classes;
        cfg["dim"] = c.synth_dim;
        cfg["n"] = c.synth_n;
        cfg["std"] = c.synth_std;
        cfg["mean_box"] = c.synth_mean_box;
    }
    if (c.command == "transform") cfg["model"] = c.model_path;

    nlohmann::json p;
    p["tool"] = "convexlda";
    p["version"] = kVersion;
    p["command"] = c.command;
    p["seed"] = c.seed;
    p["config"] = std::move(cfg);
    return p;
}

inline nlohmann::json dataset_summary(const Dataset& ds) {
    std::vector<std::string> names;
    for (int c = 0; c < ds.num_classes(); ++c) names.push_back(ds.class_name(c));
    return {{"d", ds.dim()}, {"n", ds.size()}, {"M", ds.num_classes()}, {"class_names", names}};
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
    if (path.empty()) throw ValidationError("--out is required");
    atomic_write(path, j.dump(2) + "\n");
}

// ----------------------------------------------------------- commands ----

inline void cmd_fit(const RunConfig& c) {
    const Dataset ds = load_input(c);
    ProjectionModel model = fit_method(ds, method_spec(c), c.seed);
    nlohmann::json j = to_json(model);
    j["provenance"] = provenance(c);
    write_json(c.out, j);
}

inline void cmd_transform(const RunConfig& c) {
    if (c.model_path.empty()) throw ValidationError("--model is required");
    if (c.out.empty()) throw ValidationError("--out is required");
    nlohmann::json mj;
    try {
        mj = nlohmann::json::parse(read_file(c.model_path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("model '" + c.model_path + "': " + e.what());
    }
    const ProjectionModel model = model_from_json(mj);
    const Dataset ds = load_input(c);
    Dataset embedded;
    embedded.X = transform(model, ds.X);
    embedded.labels = ds.labels;
    embedded.class_names = ds.class_names;
    for (Index i = 0; i < embedded.X.rows(); ++i) embedded.feature_names.push_back("z" + std::to_string(i));
    write_csv(embedded, c.out);
    nlohmann::json side = sidecar_json(embedded);
    side["provenance"] = provenance(c);
    atomic_write(sidecar_path(c.out), side.dump(2) + "\n");
}

inline void cmd_eval(const RunConfig& c) {
    const Dataset ds = load_input(c);
    const EvalReport report = run_protocol(ds, method_spec(c), c.split, c.knn, c.repeats, c.seed, c.threads);
    nlohmann::json j;
    j["provenance"] = provenance(c);
    j["dataset"] = dataset_summary(ds);
    j["report"] = to_json(report);
    write_json(c.out, j);
}

inline void cmd_tune(const RunConfig& c) {
    const Dataset ds = load_input(c);
    MethodSpec spec = method_spec(c);
    const TuneResult result =
        tune_lambda(ds, spec, c.folds, c.knn, parse_real_list(c.grid, "--grid"), c.refine, c.seed, c.threads);
    nlohmann::json j;
    j["provenance"] = provenance(c);
    j["dataset"] = dataset_summary(ds);
    j["result"] = to_json(result);
    write_json(c.out, j);
}

inline void cmd_sweep(const RunConfig& c) {
    const Dataset ds = load_input(c);
    MethodSpec spec = method_spec(c);
    const LambdaSweepReport report =
        sweep_lambda(ds, c.dim, parse_real_list(c.lambdas, "--lambdas"), spec.optimizer, c.gamma, c.threads);
    nlohmann::json j;
    j["provenance"] = provenance(c);
    j["dataset"] = dataset_summary(ds);
    j["report"] = to_json(report);
    write_json(c.out, j);
    if (!c.csv_out.empty()) atomic_write(c.csv_out, sweep_csv(report));
}

inline void cmd_synth(const RunConfig& c) {
    if (c.out.empty()) throw ValidationError("--out is required");
    SyntheticSpec spec;
    spec.n_classes = c.synth_classes;
    spec.dim = c.synth_dim;
    spec.n_total = c.synth_n;
    spec.class_std = c.synth_std;
    spec.mean_box = c.synth_mean_box;
    spec.seed = c.seed;
    const Dataset ds = synth_gaussian(spec);
    write_csv(ds, c.out);
    nlohmann::json side = sidecar_json(ds);
    side["provenance"] = provenance(c);
    atomic_write(sidecar_path(c.out), side.dump(2) + "\n");
}

inline void cmd_benchmark(const RunConfig& c) {
    const Dataset ds = load_input(c);
    const auto dims = parse_dim_list(c.dims);
    std::vector<Method> methods;
    for (const auto& m : split_list(c.methods)) {
        const Method parsed = method_from_string(m);
        if (parsed == Method::pca) throw ValidationError("--methods: benchmark supports convexlda and fisher_lda");
        methods.push_back(parsed);
    }
    if (methods.empty()) throw ValidationError("--methods: empty list");

    nlohmann::json cells = nlohmann::json::array();
    std::string csv = "method,dim,status,mean_accuracy,std_accuracy,successful_repeats\n";
    for (Method m : methods) {
        for (Index dim : dims) {
            MethodSpec spec = method_spec(c);
            spec.method = m;
            spec.dim = dim;
            nlohmann::json cell;
            cell["method"] = to_string(m);
            cell["dim"] = dim;
            std::string status;
            double mean = std::nan("");
            double sd = std::nan("");
            std::size_t ok = 0;
            if (m == Method::fisher_lda && dim > ds.num_classes() - 1) {
                status = "invalid";
                cell["error"] = "fisher_lda embedding dimension is limited to M-1 = " + std::to_string(ds.num_classes() - 1);
            } else {
                try {
                    const EvalReport report = run_protocol(ds, spec, c.split, c.knn, c.repeats, c.seed, c.threads);
                    mean = report.mean_accuracy;
                    sd = report.std_accuracy;
                    ok = report.per_repeat_accuracy.size();
                    status = ok == 0 ? "failed" : (report.partial ? "partial" : "ok");
                    cell["report"] = to_json(report);
                } catch (const Error& e) {
                    status = "failed";
                    cell["error"] = e.what();
                }
            }
            cell["status"] = status;
            cell["mean_accuracy"] = detail::number_or_null(mean);
            cell["std_accuracy"] = detail::number_or_null(sd);
            cells.push_back(std::move(cell));
            csv += to_string(m) + "," + std::to_string(dim) + "," + status + "," +
                   (std::isfinite(mean) ? format_double(mean) : "") + "," + (std::isfinite(sd) ? format_double(sd) : "") +
                   "," + std::to_string(ok) + "\n";
        }
    }
    nlohmann::json j;
    j["provenance"] = provenance(c);
    j["dataset"] = dataset_summary(ds);
    j["protocol"] = {{"split", c.split},
                     {"knn", c.knn},
                     {"repeats", c.repeats},
                     {"base_seed", c.seed},
                     {"pca_variance", c.pca_variance ? nlohmann::json(*c.pca_variance) : nlohmann::json(nullptr)}};
    j["cells"] = std::move(cells);
    write_json(c.out, j);
    if (!c.csv_out.empty()) atomic_write(c.csv_out, csv);
}

// -------------------------------------------------------------- parsing ----

inline void add_input_options(CLI::App* sub, RunConfig& c) {
    sub->add_option("--input", c.input, "CSV dataset (one sample per row)");
    sub->add_option("--label-col", c.label_col, "Label column: header name or zero-based index (default: last)");
    sub->add_option("--delimiter", c.delimiter, "Field delimiter (use \\t for tab)");
    sub->add_flag("--header", c.header, "First row is a header");
    sub->add_flag("--no-header", c.no_header, "First row is data");
    sub->add_option("--idx-images", c.idx_images, "IDX image file");
    sub->add_option("--idx-labels", c.idx_labels, "IDX label file");
    sub->add_flag("--idx-raw", c.idx_raw, "Keep raw 0..255 pixel values");
    sub->add_option("--classes", c.classes, "Comma-separated class names to keep");
}

inline void add_method_options(CLI::App* sub, RunConfig& c) {
    sub->add_option("--method", c.method, "convexlda | fisher_lda | pca");
    sub->add_option("--dim", c.dim, "Embedding dimension p")->check(CLI::PositiveNumber);
    sub->add_option("--lambda", c.lambda, "Class-separation weight")->check(CLI::PositiveNumber);
    sub->add_option("--gamma", c.gamma, "Log-det regularizer")->check(CLI::PositiveNumber);
    sub->add_option("--ridge", c.ridge, "Fisher LDA ridge (default 1e-6 * trace(S_w) / d)")->check(CLI::NonNegativeNumber);
    sub->add_option("--pca-variance", c.pca_variance, "Fit PCA on training data keeping this variance fraction")
        ->check(CLI::Range(0.0, 1.0) & CLI::PositiveNumber);
    sub->add_flag("--standardize", c.standardize, "Standardize features using training statistics");
    sub->add_option("--max-iters", c.optimizer.max_iters, "Optimizer iteration cap")->check(CLI::PositiveNumber);
    sub->add_option("--rel-tol", c.optimizer.rel_tol, "Relative cost-change stopping tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--grad-tol", c.optimizer.grad_tol, "Gradient max-norm stopping tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--initial-step", c.optimizer.initial_step, "First line-search step")->check(CLI::PositiveNumber);
    sub->add_option("--armijo-c", c.optimizer.armijo_c, "Armijo sufficient-decrease constant")
        ->check(CLI::Range(0.0, 1.0) & CLI::PositiveNumber);
    sub->add_option("--backtrack", c.optimizer.backtrack_factor, "Line-search shrink factor")
        ->check(CLI::Range(0.0, 1.0) & CLI::PositiveNumber);
}

inline void add_common(CLI::App* sub, RunConfig& c, bool csv_out = false) {
    sub->add_option("--seed", c.seed, "Base seed for every random choice");
    sub->add_option("--out", c.out, "Output path")->required();
    if (csv_out) sub->add_option("--csv-out", c.csv_out, "Plot-ready CSV output path");
    sub->add_option("--threads", c.threads, "Worker threads (default $CONVEXLDA_THREADS or 1)")->check(CLI::PositiveNumber);
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    RunConfig c;
    c.threads = default_threads();
    CLI::App app{"ConvexLDA supervised dimensionality reduction"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", kVersion);

    auto* fit = app.add_subcommand("fit", "Fit a projection model and write it as JSON");
    add_input_options(fit, c);
    add_method_options(fit, c);
    add_common(fit, c);

    auto* tr = app.add_subcommand("transform", "Embed a dataset with a saved model");
    add_input_options(tr, c);
    tr->add_option("--model", c.model_path, "Model JSON")->required();
    add_common(tr, c);

    auto* ev = app.add_subcommand("eval", "Repeated stratified split k-NN evaluation");
    add_input_options(ev, c);
    add_method_options(ev, c);
    ev->add_option("--split", c.split, "Training fraction")->check(CLI::Range(0.0, 1.0));
    ev->add_option("--knn", c.knn, "k of the k-NN classifier")->check(CLI::PositiveNumber);
    ev->add_option("--repeats", c.repeats, "Number of repeats")->check(CLI::PositiveNumber);
    add_common(ev, c);

    auto* tune = app.add_subcommand("tune", "Cross-validated lambda search");
    add_input_options(tune, c);
    add_method_options(tune, c);
    tune->add_option("--folds", c.folds, "CV folds")->check(CLI::Range(2, 1000));
    tune->add_option("--knn", c.knn, "k of the k-NN classifier")->check(CLI::PositiveNumber);
    tune->add_option("--grid", c.grid, "Comma-separated increasing log-scale lambda grid");
    tune->add_option("--refine", c.refine, "Linear refinement points (0 disables)")->check(CLI::NonNegativeNumber);
    add_common(tune, c);

    auto* sweep = app.add_subcommand("sweep-lambda", "Sub-costs and separation metrics across lambda");
    add_input_options(sweep, c);
    add_method_options(sweep, c);
    sweep->add_option("--lambdas", c.lambdas, "Comma-separated increasing lambda values");
    add_common(sweep, c, true);

    auto* synth = app.add_subcommand("synth", "Generate isotropic Gaussian classes as CSV");
    synth->add_option("--classes", c.synth_classes, "Number of classes")->check(CLI::PositiveNumber);
    synth->add_option("--dim", c.synth_dim, "Feature dimension")->check(CLI::PositiveNumber);
    synth->add_option("--n", c.synth_n, "Total samples")->check(CLI::PositiveNumber);
    synth->add_option("--std", c.synth_std, "Per-coordinate class standard deviation")->check(CLI::PositiveNumber);
    synth->add_option("--mean-box", c.synth_mean_box, "Class means drawn in [-box, box]^dim")->check(CLI::PositiveNumber);
    add_common(synth, c);

    auto* bench = app.add_subcommand("benchmark", "Methods x dimensions comparison table");
    add_input_options(bench, c);
    add_method_options(bench, c);
    bench->add_option("--methods", c.methods, "Comma-separated subset of convexlda,fisher_lda");
    bench->add_option("--dims", c.dims, "Comma-separated embedding dimensions");
    bench->add_option("--split", c.split, "Training fraction")->check(CLI::Range(0.0, 1.0));
    bench->add_option("--knn", c.knn, "k of the k-NN classifier")->check(CLI::PositiveNumber);
    bench->add_option("--repeats", c.repeats, "Number of repeats")->check(CLI::PositiveNumber);
    add_common(bench, c, true);

    std::vector<const char*> argv{"convexlda"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, err, err);
        err << app.help();
        return kValidation;
    }

    for (auto* sub : app.get_subcommands()) c.command = sub->get_name();
    if (c.header && c.no_header) {
        err << "error: --header and --no-header are mutually exclusive\n";
        return kValidation;
    }

    try {
        if (c.command == "fit") cmd_fit(c);
        else if (c.command == "transform") cmd_transform(c);
        else if (c.command == "eval") cmd_eval(c);
        else if (c.command == "tune") cmd_tune(c);
        else if (c.command == "sweep-lambda") cmd_sweep(c);
        else if (c.command == "synth") cmd_synth(c);
        else if (c.command == "benchmark") cmd_benchmark(c);
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kNumeric;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }
    return kOk;
}

}  // namespace convexlda::cli
