#include "e2efs/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace e2efs {

FeatureRanking FeatureRanking::from_scores(Vector scores) {
    require_finite(scores, "feature scores");
    FeatureRanking r;
    r.order.resize(scores.size());
    std::iota(r.order.begin(), r.order.end(), std::size_t{0});
    std::stable_sort(r.order.begin(), r.order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    r.scores = std::move(scores);
    return r;
}

std::vector<std::size_t> FeatureRanking::top(std::size_t k) const {
    std::vector<std::size_t> out(order.begin(), order.begin() + std::min(k, order.size()));
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> equal_frequency_bins(std::span<const double> values, std::size_t bins) {
    if (bins < 2) throw std::invalid_argument("equal_frequency_bins: need at least 2 bins");
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<std::size_t> bin(n);
    std::size_t less = 0;
    for (std::size_t pos = 0; pos < n; ++pos) {
        if (pos > 0 && values[order[pos]] != values[order[pos - 1]]) less = pos;
        bin[order[pos]] = less * bins / n;
    }
    return bin;
}

FeatureRanking mim_rank(const Dataset& d, std::size_t bins) {
    d.validate();
    const std::size_t n = d.samples();
    const std::size_t classes = d.class_count;
    const auto class_n = d.class_counts();
    Vector scores(d.features(), 0.0);
    std::vector<double> column(n);
    std::vector<std::size_t> joint(bins * classes);
    std::vector<std::size_t> bin_n(bins);
    for (std::size_t j = 0; j < d.features(); ++j) {
        for (std::size_t i = 0; i < n; ++i) column[i] = d.X(i, j);
        const auto b = equal_frequency_bins(column, bins);
        std::fill(joint.begin(), joint.end(), 0);
        std::fill(bin_n.begin(), bin_n.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++joint[b[i] * classes + static_cast<std::size_t>(d.y[i])];
            ++bin_n[b[i]];
        }
        double mi = 0.0;
        const double nn = static_cast<double>(n);
        for (std::size_t bb = 0; bb < bins; ++bb)
            for (std::size_t c = 0; c < classes; ++c) {
                const auto nbc = joint[bb * classes + c];
                if (nbc == 0) continue;
                const double p = static_cast<double>(nbc) / nn;
                mi += p * std::log(static_cast<double>(nbc) * nn /
                                   (static_cast<double>(bin_n[bb]) * static_cast<double>(class_n[c])));
            }
        scores[j] = std::max(0.0, mi);
    }
    return FeatureRanking::from_scores(std::move(scores));
}

FeatureRanking fisher_rank(const Dataset& d) {
    d.validate();
    const auto counts = d.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] < 2)
            throw std::invalid_argument("fisher_rank: class " + std::to_string(c) +
                                        " has fewer than 2 members");
    const std::size_t n = d.samples();
    const std::size_t f = d.features();
    const std::size_t classes = d.class_count;

    Vector scores(f, 0.0);
    std::vector<char> degenerate(f, 0);
    Vector class_mean(classes), class_var(classes);
    for (std::size_t j = 0; j < f; ++j) {
        double mean = 0.0;
        std::fill(class_mean.begin(), class_mean.end(), 0.0);
        std::fill(class_var.begin(), class_var.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            mean += d.X(i, j);
            class_mean[d.y[i]] += d.X(i, j);
        }
        mean /= static_cast<double>(n);
        for (std::size_t c = 0; c < classes; ++c) class_mean[c] /= static_cast<double>(counts[c]);
        for (std::size_t i = 0; i < n; ++i) {
            const double dv = d.X(i, j) - class_mean[d.y[i]];
            class_var[d.y[i]] += dv * dv;   // n_c * var_c accumulates directly
        }
        double between = 0.0, within = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            const double dm = class_mean[c] - mean;
            between += static_cast<double>(counts[c]) * dm * dm;
            within += class_var[c];
        }
        // Ratio beyond 1e12 is treated as constant-within-class.
        if (within <= 1e-12 * between) {
            if (between > 0.0) degenerate[j] = 1;
            continue;
        }
        scores[j] = between / within;
    }
    double max_score = 0.0;
    for (std::size_t j = 0; j < f; ++j)
        if (!degenerate[j]) max_score = std::max(max_score, scores[j]);
    const double boosted = (max_score > 0.0 ? max_score : 1.0) * 10.0;
    for (std::size_t j = 0; j < f; ++j)
        if (degenerate[j]) scores[j] = boosted;
    return FeatureRanking::from_scores(std::move(scores));
}

FeatureRanking relieff_rank(const Dataset& d, const ReliefFOptions& options) {
    d.validate();
    const std::size_t k = options.k_neighbors;
    if (k < 1) throw std::invalid_argument("relieff_rank: k_neighbors must be >= 1");
    const auto counts = d.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] <= k)
            throw std::invalid_argument("relieff_rank: class " + std::to_string(c) + " has " +
                                        std::to_string(counts[c]) + " members, needs more than k=" +
                                        std::to_string(k));
    const std::size_t n = d.samples();
    const std::size_t f = d.features();

    Matrix scaled(n, f);
    for (std::size_t j = 0; j < f; ++j) {
        double lo = d.X(0, j), hi = d.X(0, j);
        for (std::size_t i = 1; i < n; ++i) {
            lo = std::min(lo, d.X(i, j));
            hi = std::max(hi, d.X(i, j));
        }
        const double range = hi - lo;
        for (std::size_t i = 0; i < n; ++i) scaled(i, j) = range > 0.0 ? (d.X(i, j) - lo) / range : 0.0;
    }

    std::vector<std::size_t> samples(n);
    std::iota(samples.begin(), samples.end(), std::size_t{0});
    if (options.iterations != 0 && options.iterations < n) {
        std::mt19937_64 rng(options.seed);
        std::shuffle(samples.begin(), samples.end(), rng);
        samples.resize(options.iterations);
    }
    const double m = static_cast<double>(samples.size());

    Vector prior(d.class_count);
    for (std::size_t c = 0; c < d.class_count; ++c)
        prior[c] = static_cast<double>(counts[c]) / static_cast<double>(n);

    Vector w(f, 0.0);
    std::vector<std::pair<double, std::size_t>> by_class;
    for (std::size_t r : samples) {
        const auto rr = scaled.row(r);
        const int rc = d.y[r];
        for (std::size_t c = 0; c < d.class_count; ++c) {
            by_class.clear();
            for (std::size_t i = 0; i < n; ++i) {
                if (i == r || static_cast<std::size_t>(d.y[i]) != c) continue;
                const auto ri = scaled.row(i);
                double dist = 0.0;
                for (std::size_t j = 0; j < f; ++j) dist += std::fabs(rr[j] - ri[j]);
                by_class.emplace_back(dist, i);
            }
            std::partial_sort(by_class.begin(), by_class.begin() + k, by_class.end());
            const bool hit = static_cast<std::size_t>(rc) == c;
            const double factor = hit ? -1.0 / (m * k) : prior[c] / (1.0 - prior[rc]) / (m * k);
            for (std::size_t q = 0; q < k; ++q) {
                const auto ri = scaled.row(by_class[q].second);
                for (std::size_t j = 0; j < f; ++j) w[j] += factor * std::fabs(rr[j] - ri[j]);
            }
        }
    }
    return FeatureRanking::from_scores(std::move(w));
}

FeatureRanking random_rank(const Dataset& d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector scores(d.features());
    for (double& s : scores) s = unit(rng);
    return FeatureRanking::from_scores(std::move(scores));
}

void write_ranking_csv(const FeatureRanking& r, const std::filesystem::path& path,
                       const std::string& comment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "index,score,rank\n";
    std::vector<std::size_t> rank(r.order.size());
    for (std::size_t p = 0; p < r.order.size(); ++p) rank[r.order[p]] = p + 1;
    for (std::size_t j = 0; j < r.scores.size(); ++j)
        out << j << ',' << r.scores[j] << ',' << rank[j] << '\n';
}

} // namespace e2efs
