#pragma once

// Repeated stratified k-fold benchmark comparing mask-based selection against the
// filter rankers. Every method sees the same splits; normalization statistics and
// rankings come from the training fold only.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "e2efs/baselines.hpp"
#include "e2efs/data.hpp"
#include "e2efs/metrics.hpp"
#include "e2efs/models.hpp"
#include "e2efs/trainer.hpp"

namespace e2efs {

struct NamedDataset {
    std::string name;
    Dataset data;
};

/// What a benchmark cell is doing when it touches dataset rows.
enum class Stage { Normalize, Select, Fit, Evaluate };
const char* to_string(Stage s) noexcept;

struct RowAccess {
    Stage stage;
    std::size_t dataset;
    std::size_t repeat;
    std::size_t fold;
    std::string method;
    std::span<const std::size_t> rows;   // indices into the full dataset
};

/// Method names: e2efs, e2efs-soft, fisher, mim, relieff, random.
bool is_known_method(const std::string& name);
bool is_mask_method(const std::string& name);

struct BenchmarkConfig {
    std::vector<std::string> methods;
    std::vector<std::size_t> grid{10, 50, 100, 150, 200};
    std::size_t folds = 3;
    std::size_t repeats = 3;
    std::uint64_t seed = 0;
    ModelConfig model;
    /// Template for mask runs; epochs, lr and tol are taken from here, the
    /// selection length defaults per variant when fs_extra_epochs_soft is used.
    TrainConfig train = TrainConfig::recipe(MaskVariant::Hard);
    std::size_t fs_extra_epochs_soft = 200;
    double mu = 1.0;
    double beta = 1.0;
    double rho = 0.75;
    double T_hard = 300.0;
    double T_soft = 250.0;
    double nnz_threshold = 1e-2;
    FitConfig fit;
    std::size_t mim_bins = 10;
    ReliefFOptions relieff;
    std::size_t jobs = 1;
    bool record_timing = false;
    /// Called (serialized) before any cell reads dataset rows.
    std::function<void(const RowAccess&)> on_row_access;
};

struct CountStats {
    std::size_t count = 0;
    double mean = 0.0;
    double std = 0.0;
    std::size_t runs = 0;   // runs contributing (converged ones for mask methods)
};

struct MethodResult {
    std::string dataset;
    std::string method;
    std::string evaluation;   // "naive" (retrained on the selection) or "naive_f" (joint model)
    std::vector<CountStats> per_count;
    double auc_mean = 0.0;
    double auc_std = 0.0;
    std::size_t auc_runs = 0;
    std::size_t non_converged = 0;
    double seconds = 0.0;
    /// Balanced accuracy per run (repeat-major, then fold), per grid count; NaN where excluded.
    std::vector<std::vector<double>> runs;
};

struct BenchmarkReport {
    std::vector<std::string> datasets;
    std::vector<std::string> methods;
    std::vector<std::size_t> grid;
    std::size_t folds = 0;
    std::size_t repeats = 0;
    std::uint64_t seed = 0;
    /// splits[dataset][repeat][fold] = test indices.
    std::vector<std::vector<std::vector<std::vector<std::size_t>>>> splits;
    std::vector<MethodResult> results;
    bool record_timing = false;

    const MethodResult* find(const std::string& dataset, const std::string& method,
                             const std::string& evaluation = "naive") const;
};

BenchmarkReport run_benchmark(const std::vector<NamedDataset>& datasets, const BenchmarkConfig& config);

nlohmann::json to_json(const BenchmarkConfig& c);
nlohmann::json to_json(const BenchmarkReport& r);

/// One row per method/evaluation, one "mean ± std" AuC-BA column per dataset.
void write_report_table_csv(const BenchmarkReport& r, const std::filesystem::path& path,
                            const std::string& comment = {});
/// dataset,method,evaluation,count,mean_ba,std_ba,runs
void write_curves_csv(const BenchmarkReport& r, const std::filesystem::path& path,
                      const std::string& comment = {});

/// Deterministic 64-bit seed mixing (splitmix64 finalizer over the inputs).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) noexcept;

} // namespace e2efs
