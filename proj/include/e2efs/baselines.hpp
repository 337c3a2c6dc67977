#pragma once

// Filter rankers used as comparison baselines.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "e2efs/data.hpp"

namespace e2efs {

struct FeatureRanking {
    Vector scores;
    std::vector<std::size_t> order;   // descending score, ties by ascending index

    static FeatureRanking from_scores(Vector scores);
    /// First k entries of `order`, sorted ascending.
    std::vector<std::size_t> top(std::size_t k) const;
};

/// Equal-frequency bin id per sample: floor(#{values < v} * bins / N).
std::vector<std::size_t> equal_frequency_bins(std::span<const double> values, std::size_t bins);

/// Mutual information (nats) between each equal-frequency-discretized feature and the label.
FeatureRanking mim_rank(const Dataset& d, std::size_t bins = 10);

/// sum_c n_c (mu_c - mu)^2 / sum_c n_c var_c per feature.
FeatureRanking fisher_rank(const Dataset& d);

struct ReliefFOptions {
    std::size_t k_neighbors = 10;
    /// 0 means one full pass over every sample in index order.
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
};

/// ReliefF weights with Manhattan distance on min-max scaled features.
FeatureRanking relieff_rank(const Dataset& d, const ReliefFOptions& options = {});

/// Uniformly random scores; a chance-level reference.
FeatureRanking random_rank(const Dataset& d, std::uint64_t seed);

/// index,score,rank
void write_ranking_csv(const FeatureRanking& r, const std::filesystem::path& path,
                       const std::string& comment = {});

} // namespace e2efs
