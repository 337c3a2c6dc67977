#pragma once

// The differentiable feature mask: a vector gamma in [0,1]^F multiplied into the
// inputs, pushed towards a binary vector with exactly M ones by the penalty
//
//     L_gamma = (|gamma|_1 - |gamma|_2^2) + (1 + mu) * max(0, |M - |gamma|_1|)
//               '-------- l12 --------'   '----------- lM ------------'
//
// Both terms vanish together iff gamma is binary with |gamma|_1 = M.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "e2efs/numkernel.hpp"

namespace e2efs {

enum class MaskVariant {
    Hard,   // fixed target M
    Soft,   // moving target M_rho, removes features faster
};

std::string_view to_string(MaskVariant v) noexcept;
/// Accepts "e2efs" / "hard" and "e2efs-soft" / "soft".
MaskVariant parse_variant(std::string_view name);

struct MaskState {
    Vector gamma;
    std::size_t M = 1;
    double mu = 1.0;
    double beta = 1.0;
    double rho = 0.75;
    double T = 300.0;
    std::size_t t = 0;
    MaskVariant variant = MaskVariant::Hard;
    double nnz_threshold = 1e-2;

    /// gamma = 1 on every feature; validates 0 < M <= F.
    static MaskState all_ones(std::size_t features, std::size_t M,
                              MaskVariant variant = MaskVariant::Hard);
};

double l12_loss(std::span<const double> gamma) noexcept;
double lM_loss(std::span<const double> gamma, double M, double mu) noexcept;
inline double mask_loss(std::span<const double> gamma, double M, double mu) noexcept {
    return l12_loss(gamma) + lM_loss(gamma, M, mu);
}

/// Gradient of l12 + lM. Above the target (|gamma|_1 >= M, including the kink)
/// every component is 2(1 - g) + mu; below it, -2g - mu.
Vector reg_gradient(std::span<const double> gamma, double M, double mu);

/// g / |g|_2, or zeros when |g|_2 < 1e-12.
Vector z_normalize(std::span<const double> g);

/// beta * ((1 - alpha) z(g_f) + alpha z(g_reg)).
Vector mixed_gamma_gradient(std::span<const double> g_f, std::span<const double> g_reg,
                            double alpha, double beta);

/// min(1, t / T).
double alpha_schedule(double t, double T);

/// Hard: M. Soft: (1 - rho) M while nnz > M, nnz otherwise.
double effective_M(std::size_t nnz, std::size_t M, double rho, MaskVariant variant) noexcept;

std::size_t nnz(std::span<const double> gamma, double threshold = 1e-2) noexcept;

bool converged(std::span<const double> gamma, double M, double mu, double tol = 1e-3);

/// Indices of the M largest entries (ties to the lower index), sorted ascending.
std::vector<std::size_t> select_features(std::span<const double> gamma, std::size_t M);

/// Entries snapped to {0, 1} at 0.5.
Vector binarize(std::span<const double> gamma);

/// Clips every entry into [0, 1].
void project_unit_box(std::span<double> gamma) noexcept;

} // namespace e2efs
