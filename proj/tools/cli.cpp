#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <mutex>
#include <numeric>
#include <ranges>
#include <stdexcept>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "e2efs/baselines.hpp"
#include "e2efs/data.hpp"
#include "e2efs/eval.hpp"
#include "e2efs/mask.hpp"
#include "e2efs/metrics.hpp"
#include "e2efs/trainer.hpp"

namespace e2efs::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Raised for anything the user can fix: bad flags, unreadable data, impossible settings.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Every option writes into `config` under a fixed key. Defaults are captured before
// parsing; a --config file is merged over them; flags given explicitly win last.
class Binder {
public:
    explicit Binder(CLI::App* app) : app_(app) {}

    template <class T>
    CLI::Option* option(const std::string& flags, const std::string& key, T& var, const std::string& help) {
        auto* o = app_->add_option(flags, var, help)->capture_default_str();
        if constexpr (std::ranges::range<T> && !std::is_same_v<T, std::string>) o->delimiter(',');
        items_.push_back({o, [key, &var](json& j) { j[key] = var; }});
        return o;
    }
    CLI::Option* flag(const std::string& flags, const std::string& key, bool& var, const std::string& help) {
        auto* o = app_->add_flag(flags, var, help);
        items_.push_back({o, [key, &var](json& j) { j[key] = var; }});
        return o;
    }
    void freeze_defaults() {
        defaults_ = json::object();
        for (auto& [o, set] : items_) set(defaults_);
    }

    json resolve(const std::string& config_path, const std::string& command) const {
        json cfg = defaults_;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw InputError(config_path + ": cannot open config file");
            json file;
            try {
                file = json::parse(in);
            } catch (const json::exception& e) {
                throw InputError(config_path + ": invalid JSON (" + e.what() + ")");
            }
            if (file.contains("command") && file["command"] != command)
                throw InputError(config_path + ": config was written by '" +
                                 file["command"].get<std::string>() + "', not '" + command + "'");
            const json& patch = file.contains("config") ? file["config"] : file;
            if (!patch.is_object()) throw InputError(config_path + ": config must be a JSON object");
            for (const auto& [k, v] : patch.items()) {
                if (!cfg.contains(k)) throw InputError(config_path + ": unknown config key '" + k + "'");
                cfg[k] = v;
            }
        }
        for (const auto& [o, set] : items_)
            if (o->count() > 0) set(cfg);
        return cfg;
    }

private:
    CLI::App* app_;
    std::vector<std::pair<CLI::Option*, std::function<void(json&)>>> items_;
    json defaults_;
};

template <class T>
T get(const json& cfg, const std::string& key) {
    try {
        return cfg.at(key).get<T>();
    } catch (const json::exception&) {
        throw InputError("config key '" + key + "' has the wrong type");
    }
}

// ---- shared option groups --------------------------------------------------------

struct DataOptions {
    std::string format = "auto";
    bool header = false;
    std::string label_column;

    void bind(Binder& b) {
        b.option("--format", "format", format, "csv | libsvm | auto (by extension)")
            ->check(CLI::IsMember({"auto", "csv", "libsvm"}));
        b.flag("--header,!--no-header", "header", header, "CSV has a header row");
        b.option("--label-column", "label_column", label_column,
                 "CSV label column: index (negative from the end) or header name; default last");
    }
};

Dataset load(const std::string& path, const json& cfg) {
    if (!fs::exists(path)) throw InputError(path + ": no such file");
    std::string format = get<std::string>(cfg, "format");
    if (format == "auto") {
        const auto ext = fs::path(path).extension().string();
        format = (ext == ".svm" || ext == ".libsvm") ? "libsvm" : "csv";
    }
    Dataset d;
    try {
        if (format == "libsvm") {
            d = load_libsvm(path);
        } else {
            CsvOptions opt;
            opt.has_header = get<bool>(cfg, "header");
            const auto label = get<std::string>(cfg, "label_column");
            if (!label.empty()) {
                char* end = nullptr;
                const long idx = std::strtol(label.c_str(), &end, 10);
                if (*end == '\0')
                    opt.label_column = idx;
                else
                    opt.label_column = label;
            }
            d = load_csv(path, opt);
        }
        d.validate();
    } catch (const ParseError& e) {
        throw InputError(e.what());
    } catch (const std::invalid_argument& e) {
        throw InputError(path + ": " + e.what());
    }
    return d;
}

struct ModelOptions {
    std::string model = "naive";
    std::vector<std::size_t> hidden{50, 25, 10};
    double l2 = -1.0;

    void bind(Binder& b) {
        b.option("--model", "model", model, "classifier: naive | dense")->check(CLI::IsMember({"naive", "dense"}));
        b.option("--hidden", "hidden", hidden, "dense hidden layer widths");
        b.option("--l2", "l2", l2, "l2 coefficient; negative means 100/N");
    }
};

ModelConfig model_config(const json& cfg) {
    ModelConfig m;
    m.kind = parse_model_kind(get<std::string>(cfg, "model"));
    m.hidden = get<std::vector<std::size_t>>(cfg, "hidden");
    m.l2_coeff = get<double>(cfg, "l2");
    return m;
}

struct MaskOptions {
    double mu = 1.0, beta = 1.0, rho = 0.75, tol = 1e-3, nnz_threshold = 1e-2;
    std::size_t warmup = 5, fit_epochs = 150, batch_size = 0;
    double lr = 1e-3, fs_lr = -1.0;

    void bind(Binder& b) {
        b.option("--mu", "mu", mu, "weight of the feature-count penalty");
        b.option("--beta", "beta", beta, "scale of the mixed mask gradient");
        b.option("--rho", "rho", rho, "soft-variant target shrink factor");
        b.option("--tol", "tol", tol, "convergence tolerance on the mask penalty");
        b.option("--nnz-threshold", "nnz_threshold", nnz_threshold, "mask entries above this count as kept");
        b.option("--warmup", "warmup_epochs", warmup, "classifier-only epochs before selection");
        b.option("--fit-epochs", "fit_epochs", fit_epochs, "epochs after selection / for retraining");
        b.option("--batch-size", "batch_size", batch_size, "0 means max(2, N/50)");
        b.option("--lr", "lr", lr, "Adam learning rate");
        b.option("--fs-lr", "fs_lr", fs_lr, "learning rate during selection; <= 0 means --lr");
    }
};

void check_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError(std::string(what) + " must be positive");
}

void validate_mask_settings(const json& cfg) {
    check_positive(get<double>(cfg, "mu"), "--mu");
    check_positive(get<double>(cfg, "beta"), "--beta");
    check_positive(get<double>(cfg, "tol"), "--tol");
    check_positive(get<double>(cfg, "lr"), "--lr");
    const double rho = get<double>(cfg, "rho");
    if (!(rho >= 0.0 && rho < 1.0)) throw InputError("--rho must be in [0, 1)");
    const double th = get<double>(cfg, "nnz_threshold");
    if (!(th > 0.0 && th < 0.5)) throw InputError("--nnz-threshold must be in (0, 0.5)");
}

// ---- artifacts ----------------------------------------------------------------

fs::path output_dir(const std::string& flag) {
    std::string dir = flag;
    if (dir.empty()) {
        const char* env = std::getenv(kOutputDirEnv);
        dir = env && *env ? env : "e2efs-out";
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError(dir + ": cannot create output directory (" + ec.message() + ")");
    return dir;
}

json envelope(const std::string& command, const json& cfg) {
    return {{"tool", "e2efs"},
            {"version", E2EFS_VERSION},
            {"command", command},
            {"seed", cfg.at("seed")},
            {"config", cfg}};
}

/// One-line JSON for the leading comment of CSV artifacts.
std::string csv_comment(const std::string& command, const json& cfg) { return envelope(command, cfg).dump(); }

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError(path.string() + ": cannot open for writing");
    out << j.dump(2) << '\n';
}

json dataset_info(const std::string& path, const Dataset& d) {
    return {{"path", path}, {"samples", d.samples()}, {"features", d.features()}, {"classes", d.class_count}};
}

std::size_t resolve_jobs(long jobs) {
    if (jobs > 0) return static_cast<std::size_t>(jobs);
    return std::max(1u, std::thread::hardware_concurrency());
}

// ---- select -------------------------------------------------------------------

struct SelectCmd {
    std::string data, method = "e2efs";
    std::size_t M = 10;
    double T = -1.0;
    long fs_epochs = -1;
    std::size_t bins = 10, k_neighbors = 10;
    std::uint64_t seed = 0;
    DataOptions data_opts;
    ModelOptions model_opts;
    MaskOptions mask_opts;

    void bind(Binder& b) {
        b.option("--data", "data", data, "dataset file");
        b.option("--method", "method", method, "e2efs | e2efs-soft | fisher | mim | relieff | random");
        b.option("--m,-m,--M", "M", M, "number of features to select");
        b.option("--T", "T", T, "alpha schedule horizon in epochs; negative means 300 (hard) / 250 (soft)");
        b.option("--fs-epochs", "fs_epochs", fs_epochs, "selection epochs; negative means 300 (hard) / 200 (soft)");
        b.option("--bins", "bins", bins, "MIM equal-frequency bins");
        b.option("--k-neighbors", "k_neighbors", k_neighbors, "ReliefF neighbours");
        b.option("--seed", "seed", seed, "random seed");
        data_opts.bind(b);
        model_opts.bind(b);
        mask_opts.bind(b);
    }
};

int cmd_select(json cfg, const fs::path& dir, std::ostream& out, std::ostream& err) {
    const auto method = get<std::string>(cfg, "method");
    if (!is_known_method(method)) throw InputError("unknown method '" + method + "'");
    const auto path = get<std::string>(cfg, "data");
    if (path.empty()) throw InputError("--data is required");
    Dataset d = load(path, cfg);
    const auto M = get<std::size_t>(cfg, "M");
    if (M == 0 || M > d.features())
        throw InputError("--m " + std::to_string(M) + " must be in 1.." + std::to_string(d.features()));
    const auto seed = get<std::uint64_t>(cfg, "seed");
    d.X = erf_normalize(d.X, compute_norm_stats(d.X));

    if (!is_mask_method(method)) {
        FeatureRanking r;
        if (method == "fisher") r = fisher_rank(d);
        else if (method == "mim") r = mim_rank(d, get<std::size_t>(cfg, "bins"));
        else if (method == "relieff") r = relieff_rank(d, {get<std::size_t>(cfg, "k_neighbors"), 0, seed});
        else r = random_rank(d, seed);
        json res = envelope("select", cfg);
        res["dataset"] = dataset_info(path, d);
        res["result"] = {{"selected_indices", r.top(M)}, {"converged", true}, {"scores", r.scores}};
        write_json(dir / "result.json", res);
        write_ranking_csv(r, dir / "ranking.csv", csv_comment("select", cfg));
        out << method << ": selected " << M << " of " << d.features() << " features -> "
            << (dir / "result.json").string() << '\n';
        return kOk;
    }

    validate_mask_settings(cfg);
    const auto variant = parse_variant(method);
    MaskState mask = MaskState::all_ones(d.features(), M, variant);
    mask.mu = get<double>(cfg, "mu");
    mask.beta = get<double>(cfg, "beta");
    mask.rho = get<double>(cfg, "rho");
    mask.nnz_threshold = get<double>(cfg, "nnz_threshold");
    if (get<double>(cfg, "T") > 0.0) mask.T = get<double>(cfg, "T");
    cfg["T"] = mask.T;

    TrainConfig tc = TrainConfig::recipe(variant);
    if (get<long>(cfg, "fs_epochs") >= 0) tc.fs_extra_epochs = static_cast<std::size_t>(get<long>(cfg, "fs_epochs"));
    cfg["fs_epochs"] = tc.fs_extra_epochs;
    tc.warmup_epochs = get<std::size_t>(cfg, "warmup_epochs");
    tc.fit_epochs = get<std::size_t>(cfg, "fit_epochs");
    tc.base_lr = get<double>(cfg, "lr");
    tc.fs_lr = get<double>(cfg, "fs_lr");
    tc.batch_size = get<std::size_t>(cfg, "batch_size");
    tc.tol = get<double>(cfg, "tol");
    tc.seed = seed;

    ModelConfig mc = model_config(cfg);
    mc.seed = seed;
    auto model = make_model(mc, d.features(), d.class_count, d.samples());
    const FSResult r = train(d, *model, mask, tc);

    json res = envelope("select", cfg);
    res["dataset"] = dataset_info(path, d);
    res["result"] = to_json(r);
    write_json(dir / "result.json", res);
    write_trace_csv(r, dir / "trace.csv", csv_comment("select", cfg));

    if (!r.converged) {
        err << "e2efs: " << method << " did not converge: L_gamma = " << (r.final_l12 + r.final_lM)
            << " (tol " << tc.tol << "), nnz = " << r.final_nnz << ", M = " << M << '\n';
        return kNotConverged;
    }
    out << method << ": converged, selected " << r.selected_indices.size() << " of " << d.features()
        << " features -> " << (dir / "result.json").string() << '\n';
    return kOk;
}

// ---- bench --------------------------------------------------------------------

struct BenchCmd {
    std::vector<std::string> data;
    std::vector<std::string> methods{"e2efs", "e2efs-soft", "fisher", "mim", "relieff"};
    std::vector<std::size_t> grid{10, 50, 100, 150, 200};
    std::size_t folds = 3, repeats = 7;
    double T = 300.0, T_soft = 250.0;
    std::size_t fs_epochs = 300, fs_epochs_soft = 200;
    std::size_t bins = 10, k_neighbors = 10;
    bool timing = false;
    std::uint64_t seed = 0;
    DataOptions data_opts;
    ModelOptions model_opts;
    MaskOptions mask_opts;

    void bind(Binder& b) {
        b.option("--data", "data", data, "dataset files (comma separated or repeated)");
        b.option("--methods", "methods", methods, "methods to compare");
        b.option("--grid", "grid", grid, "feature counts");
        b.option("--folds", "folds", folds, "stratified folds");
        b.option("--repeats", "repeats", repeats, "repetitions of the k-fold split");
        b.option("--T", "T", T, "alpha horizon, hard mask");
        b.option("--T-soft", "T_soft", T_soft, "alpha horizon, soft mask");
        b.option("--fs-epochs", "fs_epochs", fs_epochs, "selection epochs, hard mask");
        b.option("--fs-epochs-soft", "fs_epochs_soft", fs_epochs_soft, "selection epochs, soft mask");
        b.option("--bins", "bins", bins, "MIM equal-frequency bins");
        b.option("--k-neighbors", "k_neighbors", k_neighbors, "ReliefF neighbours");
        b.flag("--timing,!--no-timing", "timing", timing, "record wall-clock seconds (output no longer reproducible)");
        b.option("--seed", "seed", seed, "random seed");
        data_opts.bind(b);
        model_opts.bind(b);
        mask_opts.bind(b);
    }
};

std::vector<std::string> dataset_names(const std::vector<std::string>& paths) {
    std::vector<std::string> names;
    for (const auto& p : paths) {
        std::string base = fs::path(p).stem().string();
        std::string name = base;
        for (int k = 2; std::find(names.begin(), names.end(), name) != names.end(); ++k)
            name = base + "_" + std::to_string(k);
        names.push_back(name);
    }
    return names;
}

int cmd_bench(const json& cfg, const fs::path& dir, std::size_t jobs, std::ostream& out, std::ostream& err) {
    BenchmarkConfig bc;
    bc.methods = get<std::vector<std::string>>(cfg, "methods");
    if (bc.methods.empty()) throw InputError("no methods given");
    for (const auto& m : bc.methods)
        if (!is_known_method(m)) throw InputError("unknown method '" + m + "'");
    const auto paths = get<std::vector<std::string>>(cfg, "data");
    if (paths.empty()) throw InputError("no datasets given");
    validate_mask_settings(cfg);
    bc.grid = get<std::vector<std::size_t>>(cfg, "grid");
    bc.folds = get<std::size_t>(cfg, "folds");
    bc.repeats = get<std::size_t>(cfg, "repeats");
    if (bc.folds < 2) throw InputError("--folds must be at least 2");
    if (bc.repeats < 1) throw InputError("--repeats must be at least 1");
    bc.seed = get<std::uint64_t>(cfg, "seed");
    bc.model = model_config(cfg);
    bc.train.warmup_epochs = get<std::size_t>(cfg, "warmup_epochs");
    bc.train.fs_extra_epochs = get<std::size_t>(cfg, "fs_epochs");
    bc.train.fit_epochs = get<std::size_t>(cfg, "fit_epochs");
    bc.train.base_lr = get<double>(cfg, "lr");
    bc.train.fs_lr = get<double>(cfg, "fs_lr");
    bc.train.batch_size = get<std::size_t>(cfg, "batch_size");
    bc.train.tol = get<double>(cfg, "tol");
    bc.fs_extra_epochs_soft = get<std::size_t>(cfg, "fs_epochs_soft");
    bc.mu = get<double>(cfg, "mu");
    bc.beta = get<double>(cfg, "beta");
    bc.rho = get<double>(cfg, "rho");
    bc.T_hard = get<double>(cfg, "T");
    bc.T_soft = get<double>(cfg, "T_soft");
    check_positive(bc.T_hard, "--T");
    check_positive(bc.T_soft, "--T-soft");
    bc.nnz_threshold = get<double>(cfg, "nnz_threshold");
    bc.fit.epochs = get<std::size_t>(cfg, "fit_epochs");
    bc.fit.base_lr = get<double>(cfg, "lr");
    bc.fit.batch_size = get<std::size_t>(cfg, "batch_size");
    bc.mim_bins = get<std::size_t>(cfg, "bins");
    bc.relieff.k_neighbors = get<std::size_t>(cfg, "k_neighbors");
    bc.record_timing = get<bool>(cfg, "timing");
    bc.jobs = jobs;

    const auto names = dataset_names(paths);
    std::vector<NamedDataset> datasets;
    for (std::size_t i = 0; i < paths.size(); ++i) datasets.push_back({names[i], load(paths[i], cfg)});

    BenchmarkReport report;
    try {
        report = run_benchmark(datasets, bc);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }

    json res = envelope("bench", cfg);
    res["report"] = to_json(report);
    write_json(dir / "report.json", res);
    const auto comment = csv_comment("bench", cfg);
    write_report_table_csv(report, dir / "table.csv", comment);
    write_curves_csv(report, dir / "curves.csv", comment);

    std::size_t non_converged = 0;
    for (const auto& r : report.results)
        if (r.evaluation == "naive") non_converged += r.non_converged;
    out << std::fixed << std::setprecision(3);
    for (const auto& r : report.results) {
        out << r.dataset << "  " << r.method << " (" << r.evaluation << ")  AuC-BA ";
        if (r.auc_runs) out << r.auc_mean << " +- " << r.auc_std;
        else out << "n/a";
        out << "  [" << r.auc_runs << " runs]\n";
    }
    if (non_converged)
        err << "e2efs: warning: " << non_converged << " mask training runs did not converge (excluded from means)\n";
    out << "report -> " << (dir / "report.json").string() << '\n';
    return kOk;
}

// ---- synth --------------------------------------------------------------------

struct SynthCmd {
    std::size_t n = 2000, informative = 10, noise = 90;
    double flip = 0.0;
    std::uint64_t seed = 0;

    void bind(Binder& b) {
        b.option("--n", "n_samples", n, "samples");
        b.option("--informative", "n_informative", informative, "informative features");
        b.option("--noise", "n_noise", noise, "noise features");
        b.option("--flip", "flip_prob", flip, "label flip probability");
        b.option("--seed", "seed", seed, "random seed");
    }
};

int cmd_synth(const json& cfg, const fs::path& dir, std::ostream& out) {
    SyntheticSpec s;
    s.n_samples = get<std::size_t>(cfg, "n_samples");
    s.n_informative = get<std::size_t>(cfg, "n_informative");
    s.n_noise = get<std::size_t>(cfg, "n_noise");
    s.flip_prob = get<double>(cfg, "flip_prob");
    s.seed = get<std::uint64_t>(cfg, "seed");
    if (s.n_informative < 1) throw InputError("--informative must be at least 1");
    if (s.n_samples < 2) throw InputError("--n must be at least 2");
    if (!(s.flip_prob >= 0.0 && s.flip_prob <= 1.0)) throw InputError("--flip must be in [0, 1]");
    const auto syn = make_synthetic(s);
    try {
        syn.data.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string("synthetic data degenerate: ") + e.what());
    }
    write_csv(syn.data, dir / "synth.csv", false, csv_comment("synth", cfg));
    json truth = envelope("synth", cfg);
    truth["informative"] = syn.informative;
    truth["weights"] = syn.weights;
    truth["threshold"] = syn.threshold;
    write_json(dir / "truth.json", truth);
    out << "synth: " << s.n_samples << " x " << (s.n_informative + s.n_noise) << " -> "
        << (dir / "synth.csv").string() << '\n';
    return kOk;
}

// ---- eval ---------------------------------------------------------------------

struct EvalCmd {
    std::string data, from;
    std::vector<std::size_t> indices;
    std::size_t folds = 3, repeats = 3, fit_epochs = 150, batch_size = 0;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    DataOptions data_opts;
    ModelOptions model_opts;

    void bind(Binder& b) {
        b.option("--data", "data", data, "dataset file");
        b.option("--indices", "indices", indices, "feature indices to evaluate");
        b.option("--from", "from", from, "take selected_indices from a select result.json");
        b.option("--folds", "folds", folds, "stratified folds");
        b.option("--repeats", "repeats", repeats, "repetitions of the k-fold split");
        b.option("--fit-epochs", "fit_epochs", fit_epochs, "training epochs");
        b.option("--batch-size", "batch_size", batch_size, "0 means max(2, N/50)");
        b.option("--lr", "lr", lr, "Adam learning rate");
        b.option("--seed", "seed", seed, "random seed");
        data_opts.bind(b);
        model_opts.bind(b);
    }
};

int cmd_eval(json cfg, const fs::path& dir, std::size_t jobs, std::ostream& out) {
    const auto path = get<std::string>(cfg, "data");
    if (path.empty()) throw InputError("--data is required");
    const Dataset d = load(path, cfg);
    auto indices = get<std::vector<std::size_t>>(cfg, "indices");
    const auto from = get<std::string>(cfg, "from");
    if (!from.empty()) {
        std::ifstream in(from);
        if (!in) throw InputError(from + ": cannot open");
        try {
            indices = json::parse(in).at("result").at("selected_indices").get<std::vector<std::size_t>>();
        } catch (const json::exception&) {
            throw InputError(from + ": no result.selected_indices");
        }
        // Resolved indices make the echoed config self-contained.
        cfg["indices"] = indices;
        cfg["from"] = "";
    }
    if (indices.empty()) throw InputError("no feature indices (use --indices or --from)");
    for (auto i : indices)
        if (i >= d.features())
            throw InputError("feature index " + std::to_string(i) + " out of range 0.." +
                             std::to_string(d.features() - 1));
    const auto folds = get<std::size_t>(cfg, "folds");
    const auto repeats = get<std::size_t>(cfg, "repeats");
    if (folds < 2 || repeats < 1) throw InputError("need --folds >= 2 and --repeats >= 1");
    const auto seed = get<std::uint64_t>(cfg, "seed");

    std::vector<std::vector<Fold>> splits;
    try {
        for (std::size_t r = 0; r < repeats; ++r) splits.push_back(stratified_kfold(d, folds, derive_seed(seed, {0, r})));
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    const ModelConfig base_model = model_config(cfg);
    FitConfig base_fit;
    base_fit.epochs = get<std::size_t>(cfg, "fit_epochs");
    base_fit.batch_size = get<std::size_t>(cfg, "batch_size");
    base_fit.base_lr = get<double>(cfg, "lr");
    check_positive(base_fit.base_lr, "--lr");

    std::vector<double> ba(repeats * folds);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t k = next++; k < ba.size(); k = next++) {
            try {
                const std::size_t r = k / folds, f = k % folds;
                const Fold& fold = splits[r][f];
                Dataset tr = d.select_rows(fold.train), te = d.select_rows(fold.test);
                const NormStats stats = compute_norm_stats(tr.X);
                tr.X = erf_normalize(tr.X, stats);
                te.X = erf_normalize(te.X, stats);
                ModelConfig mc = base_model;
                mc.seed = derive_seed(seed, {0, r, f, indices.size(), 1});
                FitConfig fc = base_fit;
                fc.seed = derive_seed(seed, {0, r, f, indices.size(), 3});
                ba[k] = evaluate_retrained(tr, te, indices, mc, fc);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = ba.size();
            }
        }
    };
    const std::size_t threads = std::min(jobs, ba.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    const double mean = std::accumulate(ba.begin(), ba.end(), 0.0) / static_cast<double>(ba.size());
    double ss = 0.0;
    for (double v : ba) ss += (v - mean) * (v - mean);
    const double sd = ba.size() > 1 ? std::sqrt(ss / static_cast<double>(ba.size() - 1)) : 0.0;

    json res = envelope("eval", cfg);
    res["dataset"] = dataset_info(path, d);
    res["result"] = {{"indices", indices}, {"balanced_accuracy", {{"mean", mean}, {"std", sd}, {"runs", ba}}}};
    write_json(dir / "eval.json", res);
    out << std::fixed << std::setprecision(3) << "eval: balanced accuracy " << mean << " +- " << sd << " over "
        << ba.size() << " runs -> " << (dir / "eval.json").string() << '\n';
    return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Feature selection with a differentiable binary mask, plus filter baselines"};
    app.set_version_flag("--version", std::string(E2EFS_VERSION));
    app.require_subcommand(1);

    std::string out_dir, config_path;
    long jobs = 0;
    auto add_common = [&](CLI::App* sub, bool parallel) {
        sub->add_option("--out,-o", out_dir,
                        std::string("output directory (default: $") + kOutputDirEnv + " or ./e2efs-out)");
        sub->add_option("--config", config_path, "rerun from the config embedded in a previous output JSON");
        if (parallel) sub->add_option("--jobs,-j", jobs, "worker threads (default: all cores)");
    };

    auto* select = app.add_subcommand("select", "run one feature selection method");
    auto* bench = app.add_subcommand("bench", "cross-validated comparison of methods");
    auto* synth = app.add_subcommand("synth", "write a synthetic dataset with known informative features");
    auto* eval = app.add_subcommand("eval", "cross-validated balanced accuracy of a fixed feature set");
    add_common(select, true);
    add_common(bench, true);
    add_common(synth, false);
    add_common(eval, true);

    SelectCmd select_cmd;
    BenchCmd bench_cmd;
    SynthCmd synth_cmd;
    EvalCmd eval_cmd;
    Binder select_b(select), bench_b(bench), synth_b(synth), eval_b(eval);
    select_cmd.bind(select_b);
    bench_cmd.bind(bench_b);
    synth_cmd.bind(synth_b);
    eval_cmd.bind(eval_b);
    for (Binder* b : {&select_b, &bench_b, &synth_b, &eval_b}) b->freeze_defaults();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInputError;
    }

    try {
        if (select->parsed()) {
            const json cfg = select_b.resolve(config_path, "select");
            return cmd_select(cfg, output_dir(out_dir), out, err);
        }
        if (bench->parsed()) {
            const json cfg = bench_b.resolve(config_path, "bench");
            return cmd_bench(cfg, output_dir(out_dir), resolve_jobs(jobs), out, err);
        }
        if (synth->parsed()) {
            const json cfg = synth_b.resolve(config_path, "synth");
            return cmd_synth(cfg, output_dir(out_dir), out);
        }
        if (eval->parsed()) {
            const json cfg = eval_b.resolve(config_path, "eval");
            return cmd_eval(cfg, output_dir(out_dir), resolve_jobs(jobs), out);
        }
    } catch (const InputError& e) {
        err << "e2efs: error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::invalid_argument& e) {
        err << "e2efs: error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception& e) {
        err << "e2efs: error: " << e.what() << '\n';
        return kInputError;
    }
    return kInputError;
}

} // namespace e2efs::cli
