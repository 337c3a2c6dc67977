#include "e2efs/mask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace e2efs {

std::string_view to_string(MaskVariant v) noexcept {
    return v == MaskVariant::Soft ? "e2efs-soft" : "e2efs";
}

MaskVariant parse_variant(std::string_view name) {
    if (name == "e2efs" || name == "hard") return MaskVariant::Hard;
    if (name == "e2efs-soft" || name == "soft") return MaskVariant::Soft;
    throw std::invalid_argument("unknown mask variant '" + std::string(name) + "'");
}

MaskState MaskState::all_ones(std::size_t features, std::size_t M, MaskVariant variant) {
    if (M == 0 || M > features) {
        throw std::invalid_argument("MaskState: M=" + std::to_string(M) + " must be in 1.." +
                                    std::to_string(features));
    }
    MaskState s;
    s.gamma.assign(features, 1.0);
    s.M = M;
    s.variant = variant;
    if (variant == MaskVariant::Soft) s.T = 250.0;
    return s;
}

double l12_loss(std::span<const double> gamma) noexcept {
    // sum g(1 - g) is l1 - l2^2 on the unit box and avoids cancellation.
    double s = 0.0;
    for (double g : gamma) s += g * (1.0 - g);
    return s;
}

double lM_loss(std::span<const double> gamma, double M, double mu) noexcept {
    return (1.0 + mu) * std::max(0.0, std::fabs(M - l1_norm(gamma)));
}

Vector reg_gradient(std::span<const double> gamma, double M, double mu) {
    Vector grad(gamma.size());
    const bool above = l1_norm(gamma) >= M;
    for (std::size_t i = 0; i < gamma.size(); ++i)
        grad[i] = above ? 2.0 * (1.0 - gamma[i]) + mu : -2.0 * gamma[i] - mu;
    return grad;
}

Vector z_normalize(std::span<const double> g) {
    const double norm = l2_norm(g);
    Vector out(g.size(), 0.0);
    if (norm < 1e-12) return out;
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] / norm;
    return out;
}

Vector mixed_gamma_gradient(std::span<const double> g_f, std::span<const double> g_reg,
                            double alpha, double beta) {
    if (g_f.size() != g_reg.size())
        throw std::invalid_argument("mixed_gamma_gradient: gradient lengths differ");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("mixed_gamma_gradient: alpha must be in [0, 1]");
    const Vector zf = z_normalize(g_f);
    const Vector zr = z_normalize(g_reg);
    Vector out(g_f.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = beta * ((1.0 - alpha) * zf[i] + alpha * zr[i]);
    return out;
}

double alpha_schedule(double t, double T) {
    if (!(T > 0.0)) throw std::invalid_argument("alpha_schedule: T must be positive");
    return std::min(1.0, t / T);
}

double effective_M(std::size_t nnz_count, std::size_t M, double rho, MaskVariant variant) noexcept {
    if (variant == MaskVariant::Hard) return static_cast<double>(M);
    return nnz_count > M ? (1.0 - rho) * static_cast<double>(M) : static_cast<double>(nnz_count);
}

std::size_t nnz(std::span<const double> gamma, double threshold) noexcept {
    return static_cast<std::size_t>(
        std::count_if(gamma.begin(), gamma.end(), [threshold](double g) { return g > threshold; }));
}

bool converged(std::span<const double> gamma, double M, double mu, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("converged: tol must be positive");
    return mask_loss(gamma, M, mu) <= tol;
}

std::vector<std::size_t> select_features(std::span<const double> gamma, std::size_t M) {
    std::vector<std::size_t> order(gamma.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return gamma[a] > gamma[b]; });
    order.resize(std::min(M, order.size()));
    std::sort(order.begin(), order.end());
    return order;
}

Vector binarize(std::span<const double> gamma) {
    Vector out(gamma.size());
    for (std::size_t i = 0; i < gamma.size(); ++i) out[i] = gamma[i] > 0.5 ? 1.0 : 0.0;
    return out;
}

void project_unit_box(std::span<double> gamma) noexcept {
    for (double& g : gamma) g = std::clamp(g, 0.0, 1.0);
}

} // namespace e2efs
