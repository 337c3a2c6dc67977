#include "e2efs/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace e2efs {

double balanced_accuracy(const Labels& predictions, const Labels& labels) {
    if (labels.empty()) throw std::invalid_argument("balanced_accuracy: empty input");
    if (predictions.size() != labels.size())
        throw std::invalid_argument("balanced_accuracy: " + std::to_string(predictions.size()) +
                                    " predictions for " + std::to_string(labels.size()) + " labels");
    const int max_label = *std::max_element(labels.begin(), labels.end());
    if (*std::min_element(labels.begin(), labels.end()) < 0)
        throw std::invalid_argument("balanced_accuracy: negative label");
    std::vector<std::size_t> total(max_label + 1, 0), hit(max_label + 1, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ++total[labels[i]];
        if (predictions[i] == labels[i]) ++hit[labels[i]];
    }
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < total.size(); ++c) {
        if (total[c] == 0) continue;
        sum += static_cast<double>(hit[c]) / static_cast<double>(total[c]);
        ++present;
    }
    return sum / static_cast<double>(present);
}

double auc_ba(const std::vector<std::pair<std::size_t, double>>& ba_at_counts) {
    if (ba_at_counts.empty()) throw std::invalid_argument("auc_ba: empty grid");
    double s = 0.0;
    for (const auto& [count, ba] : ba_at_counts) s += ba;
    return s / static_cast<double>(ba_at_counts.size());
}

const char* to_string(Stage s) noexcept {
    switch (s) {
    case Stage::Normalize: return "normalize";
    case Stage::Select: return "select";
    case Stage::Fit: return "fit";
    case Stage::Evaluate: return "evaluate";
    }
    return "?";
}

namespace {

const std::vector<std::string>& known_methods() {
    static const std::vector<std::string> names{"e2efs", "e2efs-soft", "fisher", "mim", "relieff", "random"};
    return names;
}

} // namespace

bool is_known_method(const std::string& name) {
    const auto& k = known_methods();
    return std::find(k.begin(), k.end(), name) != k.end();
}

bool is_mask_method(const std::string& name) { return name == "e2efs" || name == "e2efs-soft"; }

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) noexcept {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(base);
    for (auto t : tags) h = mix(h ^ mix(t));
    return h;
}

const MethodResult* BenchmarkReport::find(const std::string& dataset, const std::string& method,
                                          const std::string& evaluation) const {
    for (const auto& r : results)
        if (r.dataset == dataset && r.method == method && r.evaluation == evaluation) return &r;
    return nullptr;
}

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct CellOutput {
    std::vector<double> ba;     // per grid count
    std::vector<double> ba_f;   // joint-model BA for mask methods
    std::size_t non_converged = 0;
    double seconds = 0.0;
};

struct CellKey {
    std::size_t dataset, repeat, fold, method;
};

class Benchmark {
public:
    Benchmark(const std::vector<NamedDataset>& datasets, const BenchmarkConfig& config)
        : datasets_(datasets), config_(config) {}

    BenchmarkReport run();

private:
    void report_access(Stage stage, const CellKey& key, std::span<const std::size_t> rows) {
        if (!config_.on_row_access) return;
        std::lock_guard lock(hook_mutex_);
        config_.on_row_access(
            {stage, key.dataset, key.repeat, key.fold, config_.methods[key.method], rows});
    }

    CellOutput run_cell(const CellKey& key);
    void run_ranker_cell(const CellKey& key, const Dataset& train_n, const Fold& fold,
                         const NormStats& stats, CellOutput& out);
    void run_mask_cell(const CellKey& key, const Dataset& train_n, const Fold& fold,
                       const NormStats& stats, CellOutput& out);
    Dataset normalized_test(const CellKey& key, const Fold& fold, const NormStats& stats) {
        report_access(Stage::Evaluate, key, fold.test);
        Dataset te = datasets_[key.dataset].data.select_rows(fold.test);
        te.X = erf_normalize(te.X, stats);
        return te;
    }
    FitConfig fit_for(const CellKey& key, std::size_t count) const {
        FitConfig fit = config_.fit;
        fit.seed = derive_seed(config_.seed, {key.dataset, key.repeat, key.fold, count, 3});
        return fit;
    }
    ModelConfig model_for(const CellKey& key, std::size_t count) const {
        ModelConfig m = config_.model;
        m.seed = derive_seed(config_.seed, {key.dataset, key.repeat, key.fold, count, 1});
        return m;
    }

    const std::vector<NamedDataset>& datasets_;
    const BenchmarkConfig& config_;
    std::vector<std::vector<std::vector<Fold>>> folds_;   // [dataset][repeat][fold]
    std::mutex hook_mutex_;
};

CellOutput Benchmark::run_cell(const CellKey& key) {
    const auto start = std::chrono::steady_clock::now();
    const Fold& fold = folds_[key.dataset][key.repeat][key.fold];
    CellOutput out;
    out.ba.assign(config_.grid.size(), kMissing);
    out.ba_f.assign(config_.grid.size(), kMissing);

    report_access(Stage::Normalize, key, fold.train);
    Dataset train_n = datasets_[key.dataset].data.select_rows(fold.train);
    const NormStats stats = compute_norm_stats(train_n.X);
    train_n.X = erf_normalize(train_n.X, stats);

    if (is_mask_method(config_.methods[key.method]))
        run_mask_cell(key, train_n, fold, stats, out);
    else
        run_ranker_cell(key, train_n, fold, stats, out);

    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

void Benchmark::run_ranker_cell(const CellKey& key, const Dataset& train_n, const Fold& fold,
                                const NormStats& stats, CellOutput& out) {
    const auto& method = config_.methods[key.method];
    report_access(Stage::Select, key, fold.train);
    FeatureRanking ranking;
    if (method == "fisher") {
        ranking = fisher_rank(train_n);
    } else if (method == "mim") {
        ranking = mim_rank(train_n, config_.mim_bins);
    } else if (method == "relieff") {
        ReliefFOptions opt = config_.relieff;
        opt.seed = derive_seed(config_.seed, {key.dataset, key.repeat, key.fold, 4});
        ranking = relieff_rank(train_n, opt);
    } else {
        ranking = random_rank(train_n, derive_seed(config_.seed, {key.dataset, key.repeat, key.fold, 5}));
    }

    std::vector<std::unique_ptr<Classifier>> models;
    std::vector<std::vector<std::size_t>> selections;
    for (std::size_t g = 0; g < config_.grid.size(); ++g) {
        const auto sel = ranking.top(config_.grid[g]);
        report_access(Stage::Fit, key, fold.train);
        models.push_back(fit_plain(train_n.select_columns(sel), model_for(key, config_.grid[g]),
                                   fit_for(key, config_.grid[g])));
        selections.push_back(sel);
    }
    const Dataset test_n = normalized_test(key, fold, stats);
    for (std::size_t g = 0; g < config_.grid.size(); ++g) {
        const Dataset te = test_n.select_columns(selections[g]);
        out.ba[g] = balanced_accuracy(predict(*models[g], te.X), te.y);
    }
}

void Benchmark::run_mask_cell(const CellKey& key, const Dataset& train_n, const Fold& fold,
                              const NormStats& stats, CellOutput& out) {
    const auto variant = parse_variant(config_.methods[key.method]);
    struct Trained {
        std::unique_ptr<Classifier> joint;
        Vector mask;
        std::unique_ptr<Classifier> retrained;
        std::vector<std::size_t> selected;
    };
    std::vector<Trained> trained(config_.grid.size());
    for (std::size_t g = 0; g < config_.grid.size(); ++g) {
        const std::size_t count = config_.grid[g];
        MaskState mask = MaskState::all_ones(train_n.features(), count, variant);
        mask.mu = config_.mu;
        mask.beta = config_.beta;
        mask.rho = config_.rho;
        mask.T = variant == MaskVariant::Soft ? config_.T_soft : config_.T_hard;
        mask.nnz_threshold = config_.nnz_threshold;
        TrainConfig tc = config_.train;
        if (variant == MaskVariant::Soft) tc.fs_extra_epochs = config_.fs_extra_epochs_soft;
        tc.seed = derive_seed(config_.seed, {key.dataset, key.repeat, key.fold, count, 2});

        report_access(Stage::Select, key, fold.train);
        auto model = make_model(model_for(key, count), train_n.features(), train_n.class_count,
                                train_n.samples());
        const FSResult r = train(train_n, *model, mask, tc);
        if (!r.converged) {
            ++out.non_converged;
            continue;
        }
        report_access(Stage::Fit, key, fold.train);
        auto retrained = fit_plain(train_n.select_columns(r.selected_indices),
                                   model_for(key, count), fit_for(key, count));
        trained[g] = {std::move(model), mask.gamma, std::move(retrained), r.selected_indices};
    }
    const Dataset test_n = normalized_test(key, fold, stats);
    for (std::size_t g = 0; g < config_.grid.size(); ++g) {
        auto& t = trained[g];
        if (!t.joint) continue;
        out.ba_f[g] = balanced_accuracy(predict_masked(*t.joint, test_n.X, t.mask), test_n.y);
        const Dataset te = test_n.select_columns(t.selected);
        out.ba[g] = balanced_accuracy(predict(*t.retrained, te.X), te.y);
    }
}

void summarize(MethodResult& r, const std::vector<std::size_t>& grid) {
    const std::size_t runs = r.runs.size();
    auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
        mean = sd = 0.0;
        if (v.empty()) return;
        mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        if (v.size() < 2) return;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    };
    for (std::size_t g = 0; g < grid.size(); ++g) {
        std::vector<double> vals;
        for (std::size_t k = 0; k < runs; ++k)
            if (!std::isnan(r.runs[k][g])) vals.push_back(r.runs[k][g]);
        CountStats cs;
        cs.count = grid[g];
        cs.runs = vals.size();
        mean_std(vals, cs.mean, cs.std);
        r.per_count.push_back(cs);
    }
    std::vector<double> aucs;
    for (std::size_t k = 0; k < runs; ++k) {
        std::vector<std::pair<std::size_t, double>> pts;
        bool complete = true;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            if (std::isnan(r.runs[k][g])) complete = false;
            pts.emplace_back(grid[g], r.runs[k][g]);
        }
        if (complete) aucs.push_back(auc_ba(pts));
    }
    r.auc_runs = aucs.size();
    mean_std(aucs, r.auc_mean, r.auc_std);
}

BenchmarkReport Benchmark::run() {
    if (config_.methods.empty()) throw std::invalid_argument("run_benchmark: no methods");
    if (datasets_.empty()) throw std::invalid_argument("run_benchmark: no datasets");
    if (config_.grid.empty()) throw std::invalid_argument("run_benchmark: empty feature-count grid");
    if (config_.repeats == 0) throw std::invalid_argument("run_benchmark: repeats must be >= 1");
    for (const auto& m : config_.methods)
        if (!is_known_method(m)) throw std::invalid_argument("run_benchmark: unknown method '" + m + "'");
    for (const auto& d : datasets_) {
        d.data.validate();
        for (auto c : config_.grid)
            if (c == 0 || c > d.data.features())
                throw std::invalid_argument("run_benchmark: feature count " + std::to_string(c) +
                                            " outside 1.." + std::to_string(d.data.features()) +
                                            " for dataset '" + d.name + "'");
    }

    BenchmarkReport report;
    report.methods = config_.methods;
    report.grid = config_.grid;
    report.folds = config_.folds;
    report.repeats = config_.repeats;
    report.seed = config_.seed;
    report.record_timing = config_.record_timing;

    folds_.resize(datasets_.size());
    report.splits.resize(datasets_.size());
    for (std::size_t d = 0; d < datasets_.size(); ++d) {
        report.datasets.push_back(datasets_[d].name);
        for (std::size_t r = 0; r < config_.repeats; ++r) {
            folds_[d].push_back(stratified_kfold(datasets_[d].data, config_.folds,
                                                 derive_seed(config_.seed, {d, r})));
            auto& split = report.splits[d].emplace_back();
            for (const auto& f : folds_[d].back()) split.push_back(f.test);
        }
    }

    std::vector<CellKey> cells;
    for (std::size_t d = 0; d < datasets_.size(); ++d)
        for (std::size_t m = 0; m < config_.methods.size(); ++m)
            for (std::size_t r = 0; r < config_.repeats; ++r)
                for (std::size_t f = 0; f < config_.folds; ++f) cells.push_back({d, r, f, m});

    std::vector<CellOutput> outputs(cells.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                outputs[i] = run_cell(cells[i]);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = cells.size();
            }
        }
    };
    const std::size_t jobs = std::clamp<std::size_t>(config_.jobs, 1, cells.size());
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::size_t idx = 0;
    for (std::size_t d = 0; d < datasets_.size(); ++d) {
        for (std::size_t m = 0; m < config_.methods.size(); ++m) {
            const bool mask = is_mask_method(config_.methods[m]);
            MethodResult naive;
            naive.dataset = datasets_[d].name;
            naive.method = config_.methods[m];
            naive.evaluation = "naive";
            MethodResult joint = naive;
            joint.evaluation = "naive_f";
            for (std::size_t k = 0; k < config_.repeats * config_.folds; ++k, ++idx) {
                naive.runs.push_back(outputs[idx].ba);
                joint.runs.push_back(outputs[idx].ba_f);
                naive.non_converged += outputs[idx].non_converged;
                naive.seconds += outputs[idx].seconds;
            }
            joint.non_converged = naive.non_converged;
            joint.seconds = naive.seconds;
            summarize(naive, config_.grid);
            report.results.push_back(std::move(naive));
            if (mask) {
                summarize(joint, config_.grid);
                report.results.push_back(std::move(joint));
            }
        }
    }
    return report;
}

} // namespace

BenchmarkReport run_benchmark(const std::vector<NamedDataset>& datasets, const BenchmarkConfig& config) {
    return Benchmark(datasets, config).run();
}

nlohmann::json to_json(const BenchmarkConfig& c) {
    nlohmann::json model{{"kind", to_string(c.model.kind)},
                         {"l2_coeff", c.model.l2_coeff < 0 ? nlohmann::json("100/N") : nlohmann::json(c.model.l2_coeff)},
                         {"hidden", c.model.hidden}};
    return {{"methods", c.methods},
            {"grid", c.grid},
            {"folds", c.folds},
            {"repeats", c.repeats},
            {"seed", c.seed},
            {"model", model},
            {"train", to_json(c.train)},
            {"fs_extra_epochs_soft", c.fs_extra_epochs_soft},
            {"mu", c.mu},
            {"beta", c.beta},
            {"rho", c.rho},
            {"T_hard", c.T_hard},
            {"T_soft", c.T_soft},
            {"nnz_threshold", c.nnz_threshold},
            {"fit", {{"epochs", c.fit.epochs},
                     {"base_lr", c.fit.base_lr},
                     {"lr_divide_by", c.fit.lr_divide_by},
                     {"lr_every", c.fit.lr_every},
                     {"batch_size", c.fit.batch_size}}},
            {"mim_bins", c.mim_bins},
            {"relieff", {{"k_neighbors", c.relieff.k_neighbors}, {"iterations", c.relieff.iterations}}}};
}

namespace {

nlohmann::json number_or_null(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

} // namespace

nlohmann::json to_json(const BenchmarkReport& r) {
    nlohmann::json j;
    j["protocol"] = "repeated stratified k-fold (" + std::to_string(r.repeats) + " repeats x " +
                    std::to_string(r.folds) + " folds)";
    j["datasets"] = r.datasets;
    j["methods"] = r.methods;
    j["grid"] = r.grid;
    j["folds"] = r.folds;
    j["repeats"] = r.repeats;
    j["seed"] = r.seed;
    auto& splits = j["splits"] = nlohmann::json::object();
    for (std::size_t d = 0; d < r.datasets.size(); ++d) splits[r.datasets[d]] = r.splits[d];
    auto& results = j["results"] = nlohmann::json::array();
    for (const auto& m : r.results) {
        nlohmann::json e{{"dataset", m.dataset},
                         {"method", m.method},
                         {"evaluation", m.evaluation},
                         {"auc_ba", {{"mean", m.auc_mean}, {"std", m.auc_std}, {"runs", m.auc_runs}}},
                         {"non_converged", m.non_converged}};
        auto& pc = e["per_count"] = nlohmann::json::array();
        for (const auto& c : m.per_count)
            pc.push_back({{"count", c.count}, {"mean", c.mean}, {"std", c.std}, {"runs", c.runs}});
        auto& runs = e["runs"] = nlohmann::json::array();
        for (const auto& run : m.runs) {
            auto& row = runs.emplace_back(nlohmann::json::array());
            for (double v : run) row.push_back(number_or_null(v));
        }
        if (r.record_timing) e["seconds"] = m.seconds;
        results.push_back(std::move(e));
    }
    return j;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path, const std::string& comment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    if (!comment.empty()) out << "# " << comment << '\n';
    return out;
}

} // namespace

void write_report_table_csv(const BenchmarkReport& r, const std::filesystem::path& path,
                            const std::string& comment) {
    auto out = open_csv(path, comment);
    out << "method,evaluation";
    for (const auto& d : r.datasets) out << ',' << d;
    out << '\n';
    std::vector<std::pair<std::string, std::string>> rows;
    for (const auto& m : r.results) {
        std::pair<std::string, std::string> key{m.method, m.evaluation};
        if (std::find(rows.begin(), rows.end(), key) == rows.end()) rows.push_back(key);
    }
    for (const auto& [method, evaluation] : rows) {
        out << method << ',' << evaluation;
        for (const auto& d : r.datasets) {
            const auto* m = r.find(d, method, evaluation);
            out << ',';
            if (m && m->auc_runs > 0) {
                std::ostringstream cell;
                cell << std::fixed << std::setprecision(3) << m->auc_mean << " ± " << m->auc_std;
                out << cell.str();
            }
        }
        out << '\n';
    }
}

void write_curves_csv(const BenchmarkReport& r, const std::filesystem::path& path,
                      const std::string& comment) {
    auto out = open_csv(path, comment);
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    out << "dataset,method,evaluation,count,mean_ba,std_ba,runs\n";
    for (const auto& m : r.results)
        for (const auto& c : m.per_count)
            out << m.dataset << ',' << m.method << ',' << m.evaluation << ',' << c.count << ','
                << c.mean << ',' << c.std << ',' << c.runs << '\n';
}

} // namespace e2efs
