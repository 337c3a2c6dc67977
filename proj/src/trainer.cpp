#include "e2efs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "e2efs/metrics.hpp"

namespace e2efs {

TrainConfig TrainConfig::recipe(MaskVariant variant) {
    TrainConfig c;
    c.fs_extra_epochs = variant == MaskVariant::Soft ? 200 : 300;
    return c;
}

std::size_t batch_size_for(std::size_t samples) noexcept {
    return std::max<std::size_t>(2, samples / 50);
}

const char* to_string(Phase p) noexcept {
    switch (p) {
    case Phase::Warmup: return "warmup";
    case Phase::Selection: return "selection";
    case Phase::Fit: return "fit";
    }
    return "?";
}

namespace {

// Shuffled mini-batches; a trailing batch of one sample is merged into its predecessor
// so batch statistics are never taken over a single row.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch,
                                                   std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t s = 0; s < n; s += batch)
        out.emplace_back(order.begin() + s, order.begin() + std::min(n, s + batch));
    if (out.size() > 1 && out.back().size() == 1) {
        out[out.size() - 2].push_back(out.back().front());
        out.pop_back();
    }
    return out;
}

struct Batch {
    Matrix x;
    Labels y;
};

Batch gather(const Dataset& d, const std::vector<std::size_t>& rows) {
    Batch b{Matrix(rows.size(), d.features()), Labels(rows.size())};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy_n(d.X.row(rows[i]).begin(), d.features(), b.x.row(i).begin());
        b.y[i] = d.y[rows[i]];
    }
    return b;
}

Matrix apply_mask(const Matrix& x, std::span<const double> gamma) {
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] *= gamma[j];
    }
    return out;
}

void adam_update(Adam& opt, Classifier& model, const Gradients& g, double lr) {
    auto& params = model.params();
    std::vector<std::span<double>> ps;
    std::vector<std::span<const double>> gs;
    ps.reserve(params.size());
    gs.reserve(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
        ps.emplace_back(params[k].value.data());
        gs.emplace_back(g.params[k].data());
    }
    opt.step(ps, gs, lr);
}

// Soft masks are checked against the count they actually settled on, provided it
// does not exceed M.
double convergence_target(const MaskState& mask, std::size_t nnz_now) {
    if (mask.variant == MaskVariant::Soft && nnz_now <= mask.M) return static_cast<double>(nnz_now);
    return static_cast<double>(mask.M);
}

} // namespace

FSResult train(const Dataset& data, Classifier& model, MaskState& mask, const TrainConfig& config) {
    data.validate();
    const std::size_t f = data.features();
    if (model.input_dim() != f)
        throw std::invalid_argument("train: model expects " + std::to_string(model.input_dim()) +
                                    " features, dataset has " + std::to_string(f));
    if (mask.gamma.size() != f)
        throw std::invalid_argument("train: mask length does not match feature count");
    if (mask.M == 0 || mask.M > f) throw std::invalid_argument("train: M must be in 1..F");
    if (!(mask.T > 0.0)) throw std::invalid_argument("train: T must be positive");
    if (!(mask.mu > 0.0)) throw std::invalid_argument("train: mu must be positive");

    const std::size_t batch = config.batch_size ? config.batch_size : batch_size_for(data.samples());
    const auto weights = ClassWeights::balanced(data.y, data.class_count);
    const double fs_lr = config.fs_lr > 0.0 ? config.fs_lr : config.base_lr;
    const std::size_t fs_begin = config.warmup_epochs;
    const std::size_t fit_begin = fs_begin + config.fs_extra_epochs;
    const std::size_t total = fit_begin + config.fit_epochs;
    const LrSchedule fit_schedule{config.base_lr, config.lr_divide_by, config.lr_every, fit_begin};

    std::mt19937_64 rng(config.seed);
    Adam model_opt;
    Adam mask_opt;
    FSResult result;
    Vector frozen;   // binarized mask used by the fit phase

    for (std::size_t epoch = 0; epoch < total; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        if (epoch < fs_begin) {
            rec.phase = Phase::Warmup;
            rec.lr = config.base_lr;
        } else if (epoch < fit_begin) {
            rec.phase = Phase::Selection;
            rec.lr = fs_lr;
            mask.t = epoch - fs_begin + 1;
            rec.alpha = alpha_schedule(static_cast<double>(mask.t), mask.T);
        } else {
            rec.phase = Phase::Fit;
            rec.lr = lr_at(fit_schedule, epoch);
            rec.alpha = alpha_schedule(static_cast<double>(mask.t), mask.T);   // held at its last value
            if (frozen.empty()) frozen = binarize(mask.gamma);
        }

        double loss_sum = 0.0;
        const auto batches = make_batches(data.samples(), batch, rng);
        for (const auto& rows : batches) {
            const Batch b = gather(data, rows);
            std::span<const double> gamma = rec.phase == Phase::Fit ? std::span<const double>(frozen)
                                                                    : std::span<const double>(mask.gamma);
            const Matrix xm = apply_mask(b.x, gamma);
            const Gradients g = backward(model, xm, b.y, weights);
            loss_sum += g.loss;
            adam_update(model_opt, model, g, rec.lr);

            if (rec.phase != Phase::Selection) continue;
            // dL_f/dgamma_i = sum_n dL_f/d(x_masked)_{ni} * x_{ni}
            Vector g_f(f, 0.0);
            for (std::size_t n = 0; n < b.x.rows(); ++n) {
                const auto gi = g.input.row(n);
                const auto xi = b.x.row(n);
                for (std::size_t j = 0; j < f; ++j) g_f[j] += gi[j] * xi[j];
            }
            const std::size_t nz = nnz(mask.gamma, mask.nnz_threshold);
            const double target = effective_M(nz, mask.M, mask.rho, mask.variant);
            const Vector g_reg = reg_gradient(mask.gamma, target, mask.mu);
            const Vector mixed = mixed_gamma_gradient(g_f, g_reg, rec.alpha, mask.beta);
            mask_opt.step(std::span<double>(mask.gamma), std::span<const double>(mixed), rec.lr);
            project_unit_box(mask.gamma);
        }
        require_finite(mask.gamma, "mask");
        for (const auto& p : model.params()) require_finite(p.value.data(), "model parameters");

        std::span<const double> current = rec.phase == Phase::Fit ? std::span<const double>(frozen)
                                                                  : std::span<const double>(mask.gamma);
        rec.loss_f = loss_sum / static_cast<double>(batches.size());
        rec.l12 = l12_loss(current);
        rec.lM = lM_loss(current, static_cast<double>(mask.M), mask.mu);
        rec.nnz = nnz(current, mask.nnz_threshold);
        rec.effective_M = effective_M(rec.nnz, mask.M, mask.rho, mask.variant);
        const auto [lo, hi] = std::minmax_element(current.begin(), current.end());
        rec.gamma_min = *lo;
        rec.gamma_max = *hi;
        result.trace.push_back(rec);

        if (epoch + 1 == fit_begin || (config.fs_extra_epochs == 0 && epoch + 1 == fs_begin)) {
            result.gamma = mask.gamma;
        }
    }
    if (result.gamma.empty()) result.gamma = mask.gamma;

    result.final_nnz = nnz(result.gamma, mask.nnz_threshold);
    const double target = convergence_target(mask, result.final_nnz);
    result.final_l12 = l12_loss(result.gamma);
    result.final_lM = lM_loss(result.gamma, target, mask.mu);
    result.converged = result.final_nnz > 0 && converged(result.gamma, target, mask.mu, config.tol);
    const std::size_t keep = mask.variant == MaskVariant::Soft ? std::min(mask.M, result.final_nnz)
                                                               : mask.M;
    result.selected_indices = select_features(result.gamma, keep);
    mask.gamma = frozen.empty() ? binarize(result.gamma) : frozen;
    result.checkpoint = model.to_json();
    return result;
}

std::unique_ptr<Classifier> fit_plain(const Dataset& train_data, const ModelConfig& model_config,
                                      const FitConfig& fit) {
    train_data.validate();
    auto model = make_model(model_config, train_data.features(), train_data.class_count,
                            train_data.samples());
    const std::size_t batch = fit.batch_size ? fit.batch_size : batch_size_for(train_data.samples());
    const auto weights = ClassWeights::balanced(train_data.y, train_data.class_count);
    const LrSchedule schedule{fit.base_lr, fit.lr_divide_by, fit.lr_every, 0};
    std::mt19937_64 rng(fit.seed);
    Adam opt;
    for (std::size_t epoch = 0; epoch < fit.epochs; ++epoch) {
        const double lr = lr_at(schedule, epoch);
        for (const auto& rows : make_batches(train_data.samples(), batch, rng)) {
            const Batch b = gather(train_data, rows);
            adam_update(opt, *model, backward(*model, b.x, b.y, weights), lr);
        }
    }
    return model;
}

Labels predict_masked(Classifier& model, const Matrix& x, std::span<const double> gamma) {
    if (gamma.size() != x.cols()) throw std::invalid_argument("predict_masked: mask length mismatch");
    return predict(model, apply_mask(x, gamma));
}

double evaluate_retrained(const Dataset& train_data, const Dataset& test_data,
                          const std::vector<std::size_t>& indices, const ModelConfig& model,
                          const FitConfig& fit) {
    if (indices.empty()) throw std::invalid_argument("evaluate_retrained: empty feature list");
    const Dataset tr = train_data.select_columns(indices);
    const Dataset te = test_data.select_columns(indices);
    auto m = fit_plain(tr, model, fit);
    return balanced_accuracy(predict(*m, te.X), te.y);
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"warmup_epochs", c.warmup_epochs},
            {"fs_extra_epochs", c.fs_extra_epochs},
            {"fit_epochs", c.fit_epochs},
            {"base_lr", c.base_lr},
            {"fs_lr", c.fs_lr > 0.0 ? c.fs_lr : c.base_lr},
            {"lr_divide_by", c.lr_divide_by},
            {"lr_every", c.lr_every},
            {"batch_size", c.batch_size},
            {"tol", c.tol},
            {"seed", c.seed}};
}

nlohmann::json to_json(const MaskState& m) {
    return {{"M", m.M},
            {"mu", m.mu},
            {"beta", m.beta},
            {"rho", m.rho},
            {"T", m.T},
            {"variant", to_string(m.variant)},
            {"nnz_threshold", m.nnz_threshold}};
}

nlohmann::json to_json(const FSResult& r) {
    return {{"selected_indices", r.selected_indices},
            {"converged", r.converged},
            {"final_l12", r.final_l12},
            {"final_lM", r.final_lM},
            {"final_loss", r.final_l12 + r.final_lM},
            {"final_nnz", r.final_nnz},
            {"gamma", r.gamma},
            {"epochs", r.trace.size()},
            {"checkpoint", r.checkpoint}};
}

void write_trace_csv(const FSResult& r, const std::filesystem::path& path, const std::string& comment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "epoch,phase,lr,alpha,loss_f,l12,lM,nnz,effective_M\n";
    for (const auto& e : r.trace) {
        out << e.epoch << ',' << to_string(e.phase) << ',' << e.lr << ',' << e.alpha << ','
            << e.loss_f << ',' << e.l12 << ',' << e.lM << ',' << e.nnz << ',' << e.effective_M << '\n';
    }
}

} // namespace e2efs
