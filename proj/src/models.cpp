#include "e2efs/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace e2efs {

ClassWeights ClassWeights::balanced(const Labels& y, std::size_t class_count) {
    std::vector<std::size_t> counts(class_count, 0);
    for (int c : y) ++counts.at(static_cast<std::size_t>(c));
    ClassWeights w;
    w.weights.assign(class_count, 0.0);
    double sum = 0.0;
    for (std::size_t c = 0; c < class_count; ++c) {
        // An absent class never contributes to the loss; give it the neutral weight.
        w.weights[c] = counts[c] ? 1.0 / static_cast<double>(counts[c]) : 0.0;
        sum += w.weights[c];
    }
    std::size_t present = 0;
    for (auto n : counts) present += n > 0;
    const double mean = sum / static_cast<double>(present);
    for (std::size_t c = 0; c < class_count; ++c)
        w.weights[c] = counts[c] ? w.weights[c] / mean : 1.0;
    return w;
}

ClassWeights ClassWeights::uniform(std::size_t class_count) {
    return ClassWeights{Vector(class_count, 1.0)};
}

namespace {

void check_labels(const Matrix& scores, const Labels& y, const ClassWeights& w) {
    if (scores.rows() != y.size())
        throw std::invalid_argument("square hinge: " + std::to_string(scores.rows()) +
                                    " score rows but " + std::to_string(y.size()) + " labels");
    if (w.weights.size() != scores.cols())
        throw std::invalid_argument("square hinge: class weights do not match class count");
}

inline double target(int label, std::size_t c) { return static_cast<std::size_t>(label) == c ? 1.0 : -1.0; }

} // namespace

double square_hinge_loss(const Matrix& scores, const Labels& y, const ClassWeights& w) {
    check_labels(scores, y, w);
    if (y.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        double row = 0.0;
        for (std::size_t c = 0; c < scores.cols(); ++c) {
            const double m = std::max(0.0, 1.0 - target(y[i], c) * scores(i, c));
            row += m * m;
        }
        total += w[y[i]] * row;
    }
    return total / static_cast<double>(y.size());
}

Matrix square_hinge_grad(const Matrix& scores, const Labels& y, const ClassWeights& w) {
    check_labels(scores, y, w);
    Matrix g(scores.rows(), scores.cols());
    if (y.empty()) return g;
    const double inv_n = 1.0 / static_cast<double>(y.size());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        for (std::size_t c = 0; c < scores.cols(); ++c) {
            const double t = target(y[i], c);
            const double m = std::max(0.0, 1.0 - t * scores(i, c));
            g(i, c) = -2.0 * t * m * w[y[i]] * inv_n;
        }
    }
    return g;
}

double Classifier::l2_penalty() const noexcept {
    double s = 0.0;
    for (const auto& p : params_)
        if (p.decay) s += l2_norm_sq(p.value.data());
    return l2_coeff_ * s;
}

void Classifier::check_input(const Matrix& x) const {
    if (x.cols() != input_dim())
        throw std::invalid_argument(std::string(kind()) + " model expects " +
                                    std::to_string(input_dim()) + " input columns, got " +
                                    x.shape_string());
}

nlohmann::json Classifier::to_json() const {
    nlohmann::json j;
    j["format"] = "e2efs-model";
    j["version"] = 1;
    j["kind"] = kind();
    j["input_dim"] = input_dim();
    j["output_dim"] = output_dim();
    j["l2_coeff"] = l2_coeff_;
    auto& ps = j["params"] = nlohmann::json::array();
    for (const auto& p : params_) {
        ps.push_back({{"name", p.name},
                      {"rows", p.value.rows()},
                      {"cols", p.value.cols()},
                      {"data", p.value.data()}});
    }
    return j;
}

namespace {

Matrix glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix m(fan_in, fan_out);
    for (double& v : m.data()) v = dist(rng);
    return m;
}

void add_row_vector(Matrix& m, const Matrix& row) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += row(0, j);
    }
}

Matrix column_sums(const Matrix& m) {
    Matrix s(1, m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) s(0, j) += m(i, j);
    return s;
}

} // namespace

NaiveLinear::NaiveLinear(std::size_t inputs, std::size_t classes, double l2_coeff,
                         std::uint64_t seed) {
    if (inputs == 0 || classes == 0) throw std::invalid_argument("NaiveLinear: empty shape");
    std::mt19937_64 rng(seed);
    params_.push_back({"W", glorot(inputs, classes, rng), true});
    params_.push_back({"b", Matrix(1, classes), false});
    l2_coeff_ = l2_coeff;
}

Matrix NaiveLinear::forward(const Matrix& x, Mode mode) {
    check_input(x);
    Matrix s = matmul(x, params_[0].value);
    add_row_vector(s, params_[1].value);
    if (mode == Mode::Train) cached_input_ = x;
    return s;
}

Gradients NaiveLinear::backprop(const Matrix& d_scores) {
    if (cached_input_.rows() != d_scores.rows())
        throw std::logic_error("NaiveLinear::backprop: no matching train-mode forward pass");
    Gradients g;
    g.params.push_back(matmul_tn(cached_input_, d_scores));
    g.params.push_back(column_sums(d_scores));
    g.input = matmul_nt(d_scores, params_[0].value);
    return g;
}

std::unique_ptr<Classifier> NaiveLinear::clone() const { return std::make_unique<NaiveLinear>(*this); }

DenseNet::DenseNet(std::size_t inputs, std::size_t classes, std::vector<std::size_t> hidden,
                   double l2_coeff, std::uint64_t seed)
    : inputs_(inputs), hidden_(std::move(hidden)) {
    if (inputs == 0 || classes == 0) throw std::invalid_argument("DenseNet: empty shape");
    std::mt19937_64 rng(seed);
    std::size_t fan_in = inputs;
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        const std::size_t h = hidden_[l];
        if (h == 0) throw std::invalid_argument("DenseNet: hidden layer of width 0");
        const auto tag = std::to_string(l);
        params_.push_back({"W" + tag, glorot(fan_in, h, rng), true});
        params_.push_back({"b" + tag, Matrix(1, h), false});
        params_.push_back({"bn_scale" + tag, Matrix(1, h, 1.0), false});
        params_.push_back({"bn_shift" + tag, Matrix(1, h), false});
        running_mean_.emplace_back(h, 0.0);
        running_var_.emplace_back(h, 1.0);
        fan_in = h;
    }
    params_.push_back({"W_out", glorot(fan_in, classes, rng), true});
    params_.push_back({"b_out", Matrix(1, classes), false});
    l2_coeff_ = l2_coeff;
}

Matrix DenseNet::forward(const Matrix& x, Mode mode) {
    check_input(x);
    const bool train = mode == Mode::Train;
    if (train) cache_.assign(hidden_.size(), {});
    Matrix a = x;
    const double n = static_cast<double>(x.rows());
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        const std::size_t h = hidden_[l];
        Matrix z = matmul(a, weight(l));
        add_row_vector(z, params_[4 * l + 1].value);
        const Matrix& scale = params_[4 * l + 2].value;
        const Matrix& shift = params_[4 * l + 3].value;

        Vector mean(h, 0.0), var(h, 0.0), inv_std(h);
        if (train) {
            for (std::size_t i = 0; i < z.rows(); ++i)
                for (std::size_t j = 0; j < h; ++j) mean[j] += z(i, j);
            for (double& m : mean) m /= n;
            for (std::size_t i = 0; i < z.rows(); ++i)
                for (std::size_t j = 0; j < h; ++j) {
                    const double d = z(i, j) - mean[j];
                    var[j] += d * d;
                }
            for (double& v : var) v /= n;
            for (std::size_t j = 0; j < h; ++j) {
                running_mean_[l][j] = kMomentum * running_mean_[l][j] + (1.0 - kMomentum) * mean[j];
                running_var_[l][j] = kMomentum * running_var_[l][j] + (1.0 - kMomentum) * var[j];
            }
        } else {
            mean = running_mean_[l];
            var = running_var_[l];
        }
        for (std::size_t j = 0; j < h; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + kEpsilon);

        Matrix xhat(z.rows(), h), out(z.rows(), h);
        for (std::size_t i = 0; i < z.rows(); ++i)
            for (std::size_t j = 0; j < h; ++j) {
                xhat(i, j) = (z(i, j) - mean[j]) * inv_std[j];
                out(i, j) = scale(0, j) * xhat(i, j) + shift(0, j);
            }
        Matrix next = out;
        for (double& v : next.data()) v = std::max(0.0, v);
        if (train) cache_[l] = {std::move(a), std::move(xhat), std::move(out), std::move(inv_std)};
        a = std::move(next);
    }
    Matrix s = matmul(a, params_[params_.size() - 2].value);
    add_row_vector(s, params_.back().value);
    if (train) {
        cached_last_hidden_ = std::move(a);
        cache_valid_ = true;
    }
    return s;
}

Gradients DenseNet::backprop(const Matrix& d_scores) {
    if (!cache_valid_ || cached_last_hidden_.rows() != d_scores.rows())
        throw std::logic_error("DenseNet::backprop: no matching train-mode forward pass");
    Gradients g;
    g.params.resize(params_.size());
    const std::size_t out_w = params_.size() - 2;
    g.params[out_w] = matmul_tn(cached_last_hidden_, d_scores);
    g.params[out_w + 1] = column_sums(d_scores);
    Matrix d_a = matmul_nt(d_scores, params_[out_w].value);

    const double n = static_cast<double>(d_scores.rows());
    for (std::size_t l = hidden_.size(); l-- > 0;) {
        const auto& c = cache_[l];
        const std::size_t h = hidden_[l];
        const Matrix& scale = params_[4 * l + 2].value;
        Matrix d_scale(1, h), d_shift(1, h);
        Matrix d_xhat(d_a.rows(), h);
        for (std::size_t i = 0; i < d_a.rows(); ++i)
            for (std::size_t j = 0; j < h; ++j) {
                const double dy = c.out(i, j) > 0.0 ? d_a(i, j) : 0.0;
                d_scale(0, j) += dy * c.xhat(i, j);
                d_shift(0, j) += dy;
                d_xhat(i, j) = dy * scale(0, j);
            }
        Vector sum_dx(h, 0.0), sum_dx_xhat(h, 0.0);
        for (std::size_t i = 0; i < d_a.rows(); ++i)
            for (std::size_t j = 0; j < h; ++j) {
                sum_dx[j] += d_xhat(i, j);
                sum_dx_xhat[j] += d_xhat(i, j) * c.xhat(i, j);
            }
        Matrix d_z(d_a.rows(), h);
        for (std::size_t i = 0; i < d_a.rows(); ++i)
            for (std::size_t j = 0; j < h; ++j)
                d_z(i, j) = c.inv_std[j] / n *
                            (n * d_xhat(i, j) - sum_dx[j] - c.xhat(i, j) * sum_dx_xhat[j]);

        g.params[4 * l] = matmul_tn(c.input, d_z);
        g.params[4 * l + 1] = column_sums(d_z);
        g.params[4 * l + 2] = std::move(d_scale);
        g.params[4 * l + 3] = std::move(d_shift);
        d_a = matmul_nt(d_z, weight(l));
    }
    g.input = std::move(d_a);
    return g;
}

std::unique_ptr<Classifier> DenseNet::clone() const { return std::make_unique<DenseNet>(*this); }

nlohmann::json DenseNet::to_json() const {
    auto j = Classifier::to_json();
    j["hidden"] = hidden_;
    j["running_mean"] = running_mean_;
    j["running_var"] = running_var_;
    return j;
}

Gradients backward(Classifier& model, const Matrix& x_masked, const Labels& y,
                   const ClassWeights& w) {
    const Matrix scores = model.forward(x_masked, Mode::Train);
    const double hinge = square_hinge_loss(scores, y, w);
    Gradients g = model.backprop(square_hinge_grad(scores, y, w));
    g.loss = hinge + model.l2_penalty();
    const double c = model.l2_coeff();
    auto& params = model.params();
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (!params[k].decay || c == 0.0) continue;
        auto& gd = g.params[k].data();
        const auto& pd = params[k].value.data();
        for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += 2.0 * c * pd[i];
    }
    return g;
}

double total_loss(Classifier& model, const Matrix& x, const Labels& y, const ClassWeights& w,
                  Mode mode) {
    return square_hinge_loss(model.forward(x, mode), y, w) + model.l2_penalty();
}

Labels predict(Classifier& model, const Matrix& x) {
    const Matrix s = model.forward(x, Mode::Infer);
    Labels out(s.rows());
    for (std::size_t i = 0; i < s.rows(); ++i) {
        const auto r = s.row(i);
        out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return out;
}

std::string_view to_string(ModelKind k) noexcept { return k == ModelKind::Dense ? "dense" : "naive"; }

ModelKind parse_model_kind(std::string_view name) {
    if (name == "naive") return ModelKind::Naive;
    if (name == "dense") return ModelKind::Dense;
    throw std::invalid_argument("unknown model '" + std::string(name) + "' (expected naive|dense)");
}

std::unique_ptr<Classifier> make_model(const ModelConfig& config, std::size_t inputs,
                                       std::size_t classes, std::size_t train_samples) {
    const double l2 = config.l2_coeff >= 0.0
                          ? config.l2_coeff
                          : 100.0 / static_cast<double>(std::max<std::size_t>(train_samples, 1));
    if (config.kind == ModelKind::Dense)
        return std::make_unique<DenseNet>(inputs, classes, config.hidden, l2, config.seed);
    return std::make_unique<NaiveLinear>(inputs, classes, l2, config.seed);
}

std::unique_ptr<Classifier> model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "e2efs-model" || j.value("version", 0) != 1)
        throw std::invalid_argument("model_from_json: not an e2efs-model v1 checkpoint");
    const auto kind = j.at("kind").get<std::string>();
    const auto inputs = j.at("input_dim").get<std::size_t>();
    const auto outputs = j.at("output_dim").get<std::size_t>();
    const auto l2 = j.at("l2_coeff").get<double>();
    std::unique_ptr<Classifier> m;
    if (kind == "dense") {
        auto d = std::make_unique<DenseNet>(inputs, outputs, j.at("hidden").get<std::vector<std::size_t>>(),
                                            l2, 0);
        d->running_mean() = j.at("running_mean").get<std::vector<Vector>>();
        d->running_var() = j.at("running_var").get<std::vector<Vector>>();
        m = std::move(d);
    } else if (kind == "naive") {
        m = std::make_unique<NaiveLinear>(inputs, outputs, l2, 0);
    } else {
        throw std::invalid_argument("model_from_json: unknown kind '" + kind + "'");
    }
    const auto& ps = j.at("params");
    if (ps.size() != m->params().size())
        throw std::invalid_argument("model_from_json: parameter count mismatch");
    for (std::size_t k = 0; k < ps.size(); ++k) {
        auto& p = m->params()[k];
        p.value = Matrix(ps[k].at("rows").get<std::size_t>(), ps[k].at("cols").get<std::size_t>(),
                         ps[k].at("data").get<std::vector<double>>());
        if (p.name != ps[k].at("name").get<std::string>())
            throw std::invalid_argument("model_from_json: unexpected parameter '" +
                                        ps[k].at("name").get<std::string>() + "'");
    }
    return m;
}

} // namespace e2efs
