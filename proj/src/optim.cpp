#include "e2efs/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace e2efs {

void Adam::step(std::span<const std::span<double>> params,
                std::span<const std::span<const double>> grads, double lr) {
    if (params.size() != grads.size())
        throw std::invalid_argument("Adam::step: " + std::to_string(params.size()) +
                                    " parameter tensors but " + std::to_string(grads.size()) +
                                    " gradients");
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.size(), 0.0);
            v_.emplace_back(p.size(), 0.0);
        }
    }
    if (m_.size() != params.size())
        throw std::invalid_argument("Adam::step: parameter group changed between steps");
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].size() != grads[k].size() || params[k].size() != m_[k].size())
            throw std::invalid_argument("Adam::step: shape mismatch in tensor " + std::to_string(k));
    }

    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k];
        auto g = grads[k];
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
    }
}

void Adam::step(std::span<double> param, std::span<const double> grad, double lr) {
    const std::span<double> ps[] = {param};
    const std::span<const double> gs[] = {grad};
    step(std::span<const std::span<double>>(ps), std::span<const std::span<const double>>(gs), lr);
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
    if (params.size() != grads.size()) throw std::invalid_argument("sgd_step: shape mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

double lr_at(const LrSchedule& s, std::size_t epoch) {
    if (epoch < s.freeze_until || s.every == 0) return s.base_lr;
    const auto drops = (epoch - s.freeze_until) / s.every;
    return s.base_lr / std::pow(s.divide_by, static_cast<double>(drops));
}

} // namespace e2efs
