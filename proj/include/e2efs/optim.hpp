#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "e2efs/numkernel.hpp"

namespace e2efs {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moments are allocated on the first step and the
/// parameter group layout (count and sizes) is fixed from then on.
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    /// One update of every tensor in the group, in place.
    void step(std::span<const std::span<double>> params,
              std::span<const std::span<const double>> grads, double lr);
    /// Single-tensor convenience overload.
    void step(std::span<double> param, std::span<const double> grad, double lr);

    std::size_t step_count() const noexcept { return t_; }
    const std::vector<Vector>& first_moments() const noexcept { return m_; }
    const std::vector<Vector>& second_moments() const noexcept { return v_; }
    const AdamConfig& config() const noexcept { return config_; }

private:
    AdamConfig config_;
    std::size_t t_ = 0;
    std::vector<Vector> m_;
    std::vector<Vector> v_;
};

/// p <- p - lr * g.
void sgd_step(std::span<double> params, std::span<const double> grads, double lr);

/// Constant learning rate until `freeze_until`, then divided by `divide_by` every
/// `every` epochs.
struct LrSchedule {
    double base_lr = 1e-3;
    double divide_by = 5.0;
    std::size_t every = 50;
    std::size_t freeze_until = 0;
};

double lr_at(const LrSchedule& schedule, std::size_t epoch);

} // namespace e2efs
