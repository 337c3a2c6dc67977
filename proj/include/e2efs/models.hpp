#pragma once

// Classifiers trained through the feature mask. Both expose gradients with respect
// to their parameters and to their (masked) input, which is what the mask needs.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "e2efs/data.hpp"
#include "e2efs/numkernel.hpp"

namespace e2efs {

enum class Mode { Train, Infer };

/// Per-class sample weights inversely proportional to class frequency, mean 1.
struct ClassWeights {
    Vector weights;

    static ClassWeights balanced(const Labels& y, std::size_t class_count);
    static ClassWeights uniform(std::size_t class_count);
    double operator[](int c) const { return weights[static_cast<std::size_t>(c)]; }
};

/// Mean over samples of w(y) * sum_c max(0, 1 - t_c s_c)^2, with one-vs-rest targets
/// t_c = +1 for the true class and -1 elsewhere.
double square_hinge_loss(const Matrix& scores, const Labels& y, const ClassWeights& w);
/// d(square_hinge_loss) / d(scores).
Matrix square_hinge_grad(const Matrix& scores, const Labels& y, const ClassWeights& w);

struct Param {
    std::string name;
    Matrix value;
    bool decay = false;   // included in the l2 penalty
};

struct Gradients {
    std::vector<Matrix> params;   // aligned with Classifier::params()
    Matrix input;                 // d loss / d input, same shape as the batch
    double loss = 0.0;            // hinge + l2 penalty
};

class Classifier {
public:
    virtual ~Classifier() = default;

    virtual std::string_view kind() const noexcept = 0;
    virtual std::size_t input_dim() const noexcept = 0;
    virtual std::size_t output_dim() const noexcept = 0;

    /// Scores (N x C). Train mode caches what backprop needs.
    virtual Matrix forward(const Matrix& x, Mode mode) = 0;

    virtual std::unique_ptr<Classifier> clone() const = 0;
    virtual nlohmann::json to_json() const;

    std::vector<Param>& params() noexcept { return params_; }
    const std::vector<Param>& params() const noexcept { return params_; }

    double l2_coeff() const noexcept { return l2_coeff_; }
    void set_l2_coeff(double c) noexcept { l2_coeff_ = c; }
    /// l2_coeff * sum of squared decayed weights.
    double l2_penalty() const noexcept;

    /// Gradients of the cached batch given d loss / d scores (no l2 term).
    virtual Gradients backprop(const Matrix& d_scores) = 0;

protected:
    void check_input(const Matrix& x) const;

    std::vector<Param> params_;
    double l2_coeff_ = 0.0;
};

/// No hidden units: scores = x W + b.
class NaiveLinear final : public Classifier {
public:
    NaiveLinear(std::size_t inputs, std::size_t classes, double l2_coeff, std::uint64_t seed);

    std::string_view kind() const noexcept override { return "naive"; }
    std::size_t input_dim() const noexcept override { return params_[0].value.rows(); }
    std::size_t output_dim() const noexcept override { return params_[0].value.cols(); }

    Matrix forward(const Matrix& x, Mode mode) override;
    Gradients backprop(const Matrix& d_scores) override;
    std::unique_ptr<Classifier> clone() const override;

    Matrix& W() noexcept { return params_[0].value; }
    Matrix& b() noexcept { return params_[1].value; }

private:
    Matrix cached_input_;
};

/// Hidden layers of affine -> batch norm -> ReLU, then an affine output layer.
class DenseNet final : public Classifier {
public:
    static constexpr double kMomentum = 0.99;
    static constexpr double kEpsilon = 1e-5;

    DenseNet(std::size_t inputs, std::size_t classes, std::vector<std::size_t> hidden,
             double l2_coeff, std::uint64_t seed);

    std::string_view kind() const noexcept override { return "dense"; }
    std::size_t input_dim() const noexcept override { return inputs_; }
    std::size_t output_dim() const noexcept override { return params_.back().value.cols(); }
    const std::vector<std::size_t>& hidden() const noexcept { return hidden_; }

    Matrix forward(const Matrix& x, Mode mode) override;
    Gradients backprop(const Matrix& d_scores) override;
    std::unique_ptr<Classifier> clone() const override;
    nlohmann::json to_json() const override;

    std::vector<Vector>& running_mean() noexcept { return running_mean_; }
    std::vector<Vector>& running_var() noexcept { return running_var_; }

private:
    // Parameter layout: per hidden layer [W, b, bn_scale, bn_shift], then [W_out, b_out].
    const Matrix& weight(std::size_t layer) const { return params_[4 * layer].value; }

    struct LayerCache {
        Matrix input;     // activations entering the layer
        Matrix xhat;      // normalized pre-activations
        Matrix out;       // post-BN, pre-ReLU
        Vector inv_std;
    };

    std::size_t inputs_;
    std::vector<std::size_t> hidden_;
    std::vector<Vector> running_mean_;
    std::vector<Vector> running_var_;
    std::vector<LayerCache> cache_;
    Matrix cached_last_hidden_;
    bool cache_valid_ = false;
};

/// Runs a train-mode forward pass on `x_masked` and returns gradients of
/// square hinge + l2 penalty with respect to parameters and input.
Gradients backward(Classifier& model, const Matrix& x_masked, const Labels& y,
                   const ClassWeights& w);

/// Square hinge + l2 penalty on a fresh forward pass.
double total_loss(Classifier& model, const Matrix& x, const Labels& y, const ClassWeights& w,
                  Mode mode = Mode::Train);

/// Arg-max class per row using inference mode.
Labels predict(Classifier& model, const Matrix& x);

enum class ModelKind { Naive, Dense };

struct ModelConfig {
    ModelKind kind = ModelKind::Naive;
    /// l2 coefficient; negative means 100 / N of the training set.
    double l2_coeff = -1.0;
    std::vector<std::size_t> hidden{50, 25, 10};
    std::uint64_t seed = 0;
};

std::string_view to_string(ModelKind k) noexcept;
ModelKind parse_model_kind(std::string_view name);

std::unique_ptr<Classifier> make_model(const ModelConfig& config, std::size_t inputs,
                                       std::size_t classes, std::size_t train_samples);

/// Inverse of Classifier::to_json; exact round trip.
std::unique_ptr<Classifier> model_from_json(const nlohmann::json& j);

} // namespace e2efs
