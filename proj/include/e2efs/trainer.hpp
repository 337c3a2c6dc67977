#pragma once

// Three-phase training of a classifier through the feature mask:
//   warm-up    classifier only, mask fixed at all ones
//   selection  classifier and mask together; the mask follows the mixed gradient
//              and is projected onto [0,1] after every step
//   fit        mask snapped to {0,1} and frozen; classifier trained with the
//              decaying learning-rate schedule

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "e2efs/data.hpp"
#include "e2efs/mask.hpp"
#include "e2efs/models.hpp"
#include "e2efs/optim.hpp"

namespace e2efs {

struct TrainConfig {
    std::size_t warmup_epochs = 5;
    std::size_t fs_extra_epochs = 300;
    std::size_t fit_epochs = 150;
    double base_lr = 1e-3;
    /// Learning rate during the selection phase; <= 0 means base_lr.
    double fs_lr = -1.0;
    double lr_divide_by = 5.0;
    std::size_t lr_every = 50;
    /// 0 selects max(2, N / 50).
    std::size_t batch_size = 0;
    double tol = 1e-3;
    std::uint64_t seed = 0;

    /// Microarray recipe defaults for a variant (300/200 selection epochs).
    static TrainConfig recipe(MaskVariant variant);
};

std::size_t batch_size_for(std::size_t samples) noexcept;

enum class Phase { Warmup, Selection, Fit };
const char* to_string(Phase p) noexcept;

struct EpochRecord {
    std::size_t epoch = 0;
    Phase phase = Phase::Warmup;
    double lr = 0.0;
    double alpha = 0.0;
    double loss_f = 0.0;   // mean classifier loss over the epoch's batches
    double l12 = 0.0;
    double lM = 0.0;
    std::size_t nnz = 0;
    double effective_M = 0.0;
    double gamma_min = 1.0;
    double gamma_max = 1.0;
};

struct FSResult {
    std::vector<std::size_t> selected_indices;
    Vector gamma;           // mask at the end of the selection phase
    std::vector<EpochRecord> trace;
    bool converged = false;
    double final_l12 = 0.0;
    double final_lM = 0.0;
    std::size_t final_nnz = 0;
    nlohmann::json checkpoint;   // classifier after the fit phase
};

/// Trains `model` in place through `mask`. `data` must already be normalized.
FSResult train(const Dataset& data, Classifier& model, MaskState& mask, const TrainConfig& config);

/// Plain training with no mask: `epochs` epochs of Adam with the lr schedule
/// starting at epoch 0.
struct FitConfig {
    std::size_t epochs = 150;
    double base_lr = 1e-3;
    double lr_divide_by = 5.0;
    std::size_t lr_every = 50;
    std::size_t batch_size = 0;
    std::uint64_t seed = 0;
};

std::unique_ptr<Classifier> fit_plain(const Dataset& train_data, const ModelConfig& model,
                                      const FitConfig& fit);

/// Scores on `x` after multiplying every row by `gamma`.
Labels predict_masked(Classifier& model, const Matrix& x, std::span<const double> gamma);

/// Trains a fresh classifier on `train_data` restricted to `indices` and returns the
/// balanced accuracy on `test_data` restricted the same way.
double evaluate_retrained(const Dataset& train_data, const Dataset& test_data,
                          const std::vector<std::size_t>& indices, const ModelConfig& model,
                          const FitConfig& fit = {});

nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const MaskState& m);
nlohmann::json to_json(const FSResult& r);

/// epoch,phase,lr,alpha,loss_f,l12,lM,nnz,effective_M; `comment` becomes a leading '#' line.
void write_trace_csv(const FSResult& r, const std::filesystem::path& path,
                     const std::string& comment = {});

} // namespace e2efs
